#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irlrec/experiment.hpp"

namespace {

using irlrec::Experiment;
using irlrec::ExperimentConfig;

struct GlobalOpts {
  std::string config_path;
  std::string output_dir;
  long long seed = -1;
  int jobs = 0;
};

ExperimentConfig resolve_config(const GlobalOpts& g) {
  if (g.config_path.empty())
    throw irlrec::UsageError("--config is required for this command");
  ExperimentConfig cfg = irlrec::load_config(g.config_path);
  // Flags win over config keys.
  if (!g.output_dir.empty()) cfg.output_dir = g.output_dir;
  if (g.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(g.seed);
    cfg.train.master_seed = cfg.seed;
  }
  if (g.jobs > 0) cfg.jobs = g.jobs;
  return cfg;
}

void print_metrics(const std::map<std::string, irlrec::MethodMetrics>& rows) {
  for (const auto& [name, m] : rows)
    std::printf("%-22s HR@5 %.4f  N@5 %.4f  HR@10 %.4f  N@10 %.4f  MRR %.4f\n",
                name.c_str(), m.mean.hr5, m.mean.ndcg5, m.mean.hr10,
                m.mean.ndcg10, m.mean.mrr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge-graph-grounded listwise IRL recommender"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  GlobalOpts g;
  app.add_option("-c,--config", g.config_path, "experiment config (JSON)");
  app.add_option("-o,--output", g.output_dir, "output directory override");
  app.add_option("-s,--seed", g.seed, "master seed override");
  app.add_option("-j,--jobs", g.jobs, "worker bound override");

  auto* prepare = app.add_subcommand(
      "prepare", "load, filter and split the dataset; persist stats");
  auto* build_graph =
      app.add_subcommand("build-graph", "build the item graph and text index");
  bool sweep = false;
  int sweep_lo = 2, sweep_hi = 10;
  build_graph->add_flag("--sweep", sweep,
                        "print concept counts over a threshold range");
  build_graph->add_option("--sweep-lo", sweep_lo, "sweep lower bound");
  build_graph->add_option("--sweep-hi", sweep_hi, "sweep upper bound");

  auto* train = app.add_subcommand("train", "train the reward model");
  bool linear_flag = false, no_graph_flag = false;
  train->add_flag("--linear", linear_flag, "linear reward ablation");
  train->add_flag("--no-graph-features", no_graph_flag,
                  "drop the 4 graph-derived features");

  auto* evaluate = app.add_subcommand("evaluate", "rank test candidates");
  std::vector<std::string> methods{"irl"};
  bool baselines_flag = false;
  evaluate->add_option("--methods", methods,
                       "methods: random popularity supervised irl-linear "
                       "irl-mlp irl");
  evaluate->add_flag("--baselines", baselines_flag,
                     "add random/popularity/supervised rows");

  auto* rerank =
      app.add_subcommand("rerank", "re-rank shortlists through a provider");
  std::string provider_name;
  rerank->add_option("--provider", provider_name, "provider name")->required();

  auto* tune =
      app.add_subcommand("tune-alpha", "grid-search the fusion weight");
  std::string tune_provider;
  tune->add_option("--provider", tune_provider, "provider name")->required();

  auto* ablations =
      app.add_subcommand("ablations", "component ablation matrix");

  auto* full_run = app.add_subcommand(
      "full-run", "prepare, build-graph, train and evaluate in one go");

  auto* dump = app.add_subcommand("dump-features", "write feature vectors");
  std::string dump_stage = "test", dump_path = "features.tsv";
  dump->add_option("--stage", dump_stage, "train | val | test");
  dump->add_option("--out", dump_path, "output TSV path");

  auto* reference =
      app.add_subcommand("config-reference", "print the config schema");

  CLI11_PARSE(app, argc, argv);

  try {
    if (reference->parsed()) {
      std::fputs(irlrec::config_reference().c_str(), stdout);
      return 0;
    }
    ExperimentConfig cfg = resolve_config(g);
    if (train->parsed()) {
      if (linear_flag) cfg.train.model = "linear";
      if (no_graph_flag) cfg.features.graph_features = false;
    }
    Experiment exp(cfg);

    if (prepare->parsed()) {
      auto stats = exp.cmd_prepare();
      std::printf("prepared: %zu users, %zu items, %zu positives (%s)\n",
                  stats["users"].get<std::size_t>(),
                  stats["items"].get<std::size_t>(),
                  stats["positives"].get<std::size_t>(), exp.hash().c_str());
    } else if (build_graph->parsed()) {
      if (sweep) {
        auto rows = exp.graph_sweep(sweep_lo, sweep_hi);
        std::printf("threshold  concepts  nodes  item-item  edges\n");
        for (const auto& row : rows)
          std::printf("%9d %9zu %6zu %10zu %6zu\n",
                      row["threshold"].get<int>(),
                      row["concept_nodes"].get<std::size_t>(),
                      row["nodes_total"].get<std::size_t>(),
                      row["edges_item_item"].get<std::size_t>(),
                      row["edges_total"].get<std::size_t>());
      } else {
        auto stats = exp.cmd_build_graph();
        std::printf(
            "graph: %zu nodes (%zu items, %zu categories, %zu concepts), "
            "%zu edges\n",
            stats["nodes_total"].get<std::size_t>(),
            stats["item_nodes"].get<std::size_t>(),
            stats["category_nodes"].get<std::size_t>(),
            stats["concept_nodes"].get<std::size_t>(),
            stats["edges_total"].get<std::size_t>());
      }
    } else if (train->parsed()) {
      auto result = exp.cmd_train(exp.config_variant());
      if (result.stop_reason == "loaded") {
        std::printf("checkpoint up to date (%s)\n", exp.hash().c_str());
      } else {
        std::printf("trained %zu epochs, best val NDCG@10 %.4f (%s)\n",
                    result.log.size(), result.best_val_ndcg10,
                    result.stop_reason.c_str());
      }
    } else if (evaluate->parsed()) {
      if (baselines_flag) {
        std::vector<std::string> all{"random", "popularity", "supervised"};
        for (const std::string& m : methods)
          if (m != "random" && m != "popularity" && m != "supervised")
            all.push_back(m);
        methods = all;
      }
      print_metrics(exp.cmd_evaluate(methods));
    } else if (rerank->parsed()) {
      auto out = exp.cmd_rerank(provider_name);
      std::printf("provider %s: alpha %.1f, gate %s, N@10 %.4f (IRL %.4f)\n",
                  out.provider.c_str(), out.alpha,
                  out.gate.fusion_applied ? "open" : "closed",
                  out.metrics.mean.ndcg10, out.irl_metrics.mean.ndcg10);
    } else if (tune->parsed()) {
      const double alpha = exp.cmd_tune_alpha(tune_provider);
      std::printf("alpha* = %.1f\n", alpha);
    } else if (ablations->parsed()) {
      auto out = exp.cmd_ablations();
      for (const auto& row : out["table"])
        std::printf("%-22s HR@10 %.4f  N@10 %.4f\n",
                    row["configuration"].get<std::string>().c_str(),
                    row["hr10"].get<double>(), row["ndcg10"].get<double>());
      const auto& super = out["superadditivity"];
      std::printf("synergy %.4f (superadditive: %s)\n",
                  super["synergy"].get<double>(),
                  super["superadditive"].get<bool>() ? "yes" : "no");
    } else if (full_run->parsed()) {
      exp.cmd_prepare();
      exp.cmd_build_graph();
      exp.cmd_train(exp.config_variant());
      print_metrics(exp.cmd_evaluate(
          {"random", "popularity", "supervised", "irl"}));
    } else if (dump->parsed()) {
      exp.dump_features(dump_stage, dump_path);
      std::printf("wrote %s\n", dump_path.c_str());
    }
    return 0;
  } catch (const irlrec::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const irlrec::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const irlrec::NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const irlrec::ProviderError& e) {
    std::fprintf(stderr, "provider failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
