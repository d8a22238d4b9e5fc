// Copyright 2026 The ctnarr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "ctn/annotation.hpp"

#include <fstream>

#include <httplib.h>

namespace ctn {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

int http_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::auth: return 401;
    case ErrorCode::forbidden: return 403;
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict:
    case ErrorCode::state: return 409;
    case ErrorCode::parse:
    case ErrorCode::parameter:
    case ErrorCode::domain:
    case ErrorCode::dimension: return 400;
    default: return 500;
  }
}

std::vector<TokenEntry> load_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read token file " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("tokens") || !j["tokens"].is_array())
    fail(ErrorCode::parse, path.string() + ": expected {\"tokens\": [...]}");
  std::vector<TokenEntry> out;
  for (const auto& t : j["tokens"]) {
    TokenEntry e;
    e.coder = t.at("coder").get<std::string>();
    e.token = t.at("token").get<std::string>();
    e.moderator = t.value("moderator", false);
    if (e.token.empty()) fail(ErrorCode::parse, "empty token for coder " + e.coder);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

ordered_json document_json(const Document& d) {
  return ordered_json{{"post_id", d.post_id},
                      {"subreddit", d.subreddit},
                      {"text", d.text},
                      {"created_utc", d.created_utc},
                      {"num_comments", d.num_comments},
                      {"karma", d.karma}};
}

ordered_json phase_json(const PhaseView& v) {
  return ordered_json{{"id", v.config.id},
                      {"kind", to_string(v.config.kind)},
                      {"round", v.config.round},
                      {"status", to_string(v.status)},
                      {"samples", v.config.samples.size()},
                      {"coders", v.config.coders},
                      {"groups", v.config.groups},
                      {"raters", v.config.raters()},
                      {"auto_consensus", v.config.auto_consensus},
                      {"fully_labeled", v.fully_labeled},
                      {"consensus", v.consensus.size()}};
}

void send_json(httplib::Response& res, const ordered_json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, ordered_json{{"error", {{"code", to_string(code)}, {"message", message}}}}, http_status_for(code));
}

Verdict verdict_field(const json& body) {
  if (!body.contains("verdict") || !body["verdict"].is_string()) fail(ErrorCode::parameter, "missing verdict");
  const auto v = parse_verdict_word(body["verdict"].get<std::string>());
  if (!v) fail(ErrorCode::parameter, "verdict must be Yes or No");
  return *v;
}

std::string string_field(const json& body, const char* key) {
  if (!body.contains(key) || !body[key].is_string()) fail(ErrorCode::parameter, std::string("missing ") + key);
  return body[key].get<std::string>();
}

}  // namespace

struct AnnotationServer::Impl {
  AnnotationService& service;
  std::vector<TokenEntry> tokens;
  ServerOptions options;
  httplib::Server server;

  const TokenEntry& authenticate(const httplib::Request& req) const {
    const auto header = req.get_header_value("Authorization");
    constexpr std::string_view prefix = "Bearer ";
    if (header.rfind(prefix, 0) != 0) fail(ErrorCode::auth, "missing bearer token");
    const std::string token = header.substr(prefix.size());
    for (const auto& t : tokens)
      if (t.token == token) return t;
    fail(ErrorCode::auth, "unknown token");
  }

  using Handler = std::function<void(const TokenEntry&, const httplib::Request&, httplib::Response&)>;

  httplib::Server::Handler guarded(Handler h) {
    return [this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(authenticate(req), req, res);
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const json::exception& e) {
        send_error(res, ErrorCode::parse, e.what());
      } catch (const std::exception& e) {
        send_json(res, ordered_json{{"error", {{"code", "internal"}, {"message", e.what()}}}}, 500);
      }
    };
  }

  static json body_of(const httplib::Request& req) {
    json j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(ErrorCode::parse, "request body must be a JSON object");
    return j;
  }

  // A coder acts as themself; a moderator may act for anyone.
  static std::string acting_coder(const TokenEntry& who, const std::string& requested) {
    if (requested.empty() || requested == who.coder) return who.coder;
    if (!who.moderator) fail(ErrorCode::forbidden, "token for '" + who.coder + "' cannot act as '" + requested + "'");
    return requested;
  }

  void routes() {
    server.Get("/api/me", guarded([](const TokenEntry& who, const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"coder", who.coder}, {"moderator", who.moderator}});
    }));
    server.Get("/api/phases", guarded([this](const TokenEntry&, const httplib::Request&, httplib::Response& res) {
      ordered_json arr = ordered_json::array();
      for (const auto& v : service.phases()) arr.push_back(phase_json(v));
      send_json(res, {{"phases", arr}});
    }));
    server.Get(R"(/api/phases/([^/]+)/next)",
               guarded([this](const TokenEntry& who, const httplib::Request& req, httplib::Response& res) {
                 const std::string phase = req.matches[1];
                 const std::string coder = acting_coder(who, req.get_param_value("coder"));
                 ordered_json pending = ordered_json::array();
                 for (const auto& d : service.next_batch(coder, phase)) pending.push_back(document_json(d));
                 send_json(res, {{"phase", phase}, {"coder", coder}, {"count", pending.size()}, {"pending", pending}});
               }));
    server.Get(R"(/api/phases/([^/]+)/disagreements)",
               guarded([this](const TokenEntry&, const httplib::Request& req, httplib::Response& res) {
                 const std::string phase = req.matches[1];
                 const auto flag = req.get_param_value("include_resolved");
                 const bool include_resolved = flag == "1" || flag == "true";
                 ordered_json items = ordered_json::array();
                 for (const auto& item : service.disagreement_queue(phase, include_resolved)) {
                   ordered_json by = ordered_json::object();
                   for (const auto& [r, v] : item.by_rater) by[r] = to_string(v);
                   ordered_json j{{"post_id", item.post_id},
                                  {"histogram", {{"Yes", item.yes}, {"No", item.no}}},
                                  {"verdicts", by}};
                   j["consensus"] = item.consensus ? ordered_json(to_string(*item.consensus)) : ordered_json(nullptr);
                   j["document"] = document_json(service.document(item.post_id));
                   items.push_back(j);
                 }
                 send_json(res, {{"phase", phase}, {"count", items.size()}, {"items", items}});
               }));
    server.Post("/api/verdicts", guarded([this](const TokenEntry& who, const httplib::Request& req, httplib::Response& res) {
      const json body = body_of(req);
      const std::string coder = acting_coder(who, body.value("coder", std::string()));
      std::optional<int> round;
      if (body.contains("round") && !body["round"].is_null()) round = body["round"].get<int>();
      const auto rec = service.submit_verdict(coder, string_field(body, "post_id"), verdict_field(body),
                                              string_field(body, "phase"), round);
      send_json(res, {{"ok", true},
                      {"record",
                       {{"post_id", rec.post_id},
                        {"coder", rec.coder_id},
                        {"rater", rec.rater_id},
                        {"verdict", to_string(rec.verdict)},
                        {"phase", rec.phase_id},
                        {"round", rec.round},
                        {"timestamp", rec.timestamp}}}});
    }));
    server.Post("/api/consensus", guarded([this](const TokenEntry& who, const httplib::Request& req, httplib::Response& res) {
      if (!who.moderator) fail(ErrorCode::forbidden, "only a moderator may record consensus");
      const json body = body_of(req);
      const std::string phase = string_field(body, "phase");
      const std::string post = string_field(body, "post_id");
      service.record_consensus(post, verdict_field(body), phase, body.value("override", false), who.coder);
      send_json(res, {{"ok", true}, {"phase", phase_json(service.phase(phase))}});
    }));
    server.Get(R"(/api/agreement/([^/]+))",
               guarded([this](const TokenEntry&, const httplib::Request& req, httplib::Response& res) {
                 send_json(res, service.agreement(req.matches[1]).to_json());
               }));
    server.Get("/api/audit", guarded([this](const TokenEntry&, const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> phase;
      if (req.has_param("phase")) phase = req.get_param_value("phase");
      json arr = json::array();
      for (auto& e : service.audit_events(phase)) arr.push_back(std::move(e));
      res.status = 200;
      res.set_content(json{{"events", arr}}.dump(), "application/json");
    }));
    if (options.ui_dir && !server.set_mount_point("/", options.ui_dir->string()))
      fail(ErrorCode::not_found, "UI directory " + options.ui_dir->string() + " does not exist");
  }

};

AnnotationServer::AnnotationServer(AnnotationService& service, std::vector<TokenEntry> tokens, ServerOptions options)
    : impl_(new Impl{service, std::move(tokens), std::move(options), {}}) {
  impl_->routes();
}

AnnotationServer::~AnnotationServer() = default;

int AnnotationServer::bind() {
  int port = impl_->options.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (!impl_->server.bind_to_port(impl_->options.host, port)) {
    port = -1;
  }
  if (port < 0) fail(ErrorCode::io, "cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  return port;
}

void AnnotationServer::serve() { impl_->server.listen_after_bind(); }

void AnnotationServer::stop() { impl_->server.stop(); }

}  // namespace ctn
