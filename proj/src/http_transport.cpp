#include <regex>

#include <httplib.h>

#include "termeval/oracle.hpp"

namespace termeval::oracle {

namespace {

class HttplibTransport : public Transport {
 public:
  HttpResponse post(const std::string& url,
                    const std::vector<std::pair<std::string, std::string>>& headers,
                    const std::string& body, std::chrono::milliseconds timeout) override {
    static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(url, m, kUrl)) return {0, "", "unsupported endpoint URL '" + url + "'"};
    std::string path = m[2].matched ? m[2].str() : "/";

    httplib::Client client(m[1].str());
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) return {0, "", "request failed: " + httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  }
};

}  // namespace

std::unique_ptr<Transport> make_http_transport() { return std::make_unique<HttplibTransport>(); }

}  // namespace termeval::oracle
