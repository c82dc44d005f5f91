#pragma once

// cpp-httplib binding for AnnotationService.

#include <map>
#include <string>

#include <httplib.h>

#include "motioncode/service.hpp"

namespace motioncode {

inline void bind_routes(httplib::Server& server, AnnotationService& service) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [key, value] : req.params) query.emplace(key, value);
    const HttpResponse out = service.handle(req.method, req.path, query, req.body);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server.Get("/api/taxonomy", forward);
  server.Get("/api/manifest", forward);
  server.Get("/api/verbs", forward);
  server.Get("/api/annotations", forward);
  server.Post("/api/annotations", forward);
}

}  // namespace motioncode
