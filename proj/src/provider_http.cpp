#include "irlrec/rerank.hpp"

#include <chrono>
#include <cstdlib>
#include <memory>
#include <string>
#include <thread>

// httplib drags in <resolv.h>, whose _res macro mangles Eigen declarations;
// it must come after every Eigen-including header.
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace irlrec {

using json = nlohmann::json;

namespace {

// Generic chat-completion client; works against any endpoint speaking the
// {model, messages, temperature} request / choices[0].message.content
// response convention.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(const ProviderConfig& cfg) : cfg_(cfg) {
    std::string rest;
    if (cfg.endpoint.rfind("http://", 0) == 0) {
      rest = cfg.endpoint.substr(7);
    } else {
      throw UsageError("provider " + cfg.name +
                       ": endpoint must start with http:// (TLS termination "
                       "belongs to a local gateway)");
    }
    const std::size_t slash = rest.find('/');
    host_ = slash == std::string::npos ? rest : rest.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
    port_ = 80;
    const std::size_t colon = host_.find(':');
    if (colon != std::string::npos) {
      port_ = std::stoi(host_.substr(colon + 1));
      host_ = host_.substr(0, colon);
    }
  }

  std::string name() const override { return cfg_.name; }

  std::string complete(const RerankTask& task) override {
    json body;
    body["model"] = cfg_.model;
    body["temperature"] = 0.0;
    body["messages"] =
        json::array({{{"role", "user"}, {"content", task.prompt}}});
    const std::string payload = body.dump();

    httplib::Headers headers;
    if (!cfg_.auth_env.empty()) {
      const char* token = std::getenv(cfg_.auth_env.c_str());
      if (token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
      httplib::Client client(host_, port_);
      client.set_connection_timeout(cfg_.timeout_s, 0);
      client.set_read_timeout(cfg_.timeout_s, 0);
      auto res = client.Post(path_, headers, payload, "application/json");
      if (!res) {
        last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      json parsed = json::parse(res->body, nullptr, false);
      if (parsed.is_discarded()) {
        last_error = "response is not JSON";
        continue;
      }
      try {
        return parsed.at("choices").at(0).at("message").at("content")
            .get<std::string>();
      } catch (const json::exception& e) {
        last_error = std::string("unexpected response shape: ") + e.what();
      }
    }
    throw ProviderError("provider " + cfg_.name + " failed after " +
                        std::to_string(cfg_.retries + 1) + " attempts: " +
                        last_error);
  }

 private:
  ProviderConfig cfg_;
  std::string host_;
  std::string path_;
  int port_ = 80;
};

}  // namespace

std::unique_ptr<Provider> make_http_provider(const ProviderConfig& cfg) {
  return std::make_unique<HttpProvider>(cfg);
}

}  // namespace irlrec
