#pragma once

// HTTP+JSON surface of the task service.
//
//   POST /sessions                     {config}           -> 201 {session_id}
//   GET  /sessions/{id}                                   -> status, verdict when done
//   GET  /sessions/{id}/tasks?status=pending[&worker_id=] -> [task]
//   POST /tasks/{task_id}/assignments  {worker_id, answer} -> {status, remaining_assignments}
//   GET  /items/{id}/image[?session=]                     -> image bytes
//   GET  /sessions/{id}/log                               -> JSONL
//
// status=pending lists every task still taking answers (pending or
// answering); answering, resolved, canceled and all filter exactly.
// Errors come back as {"error": ...} with 400 (bad input), 404 (unknown
// session, task, item or manifest) or 409 (duplicate or resolved task).

#include "coverage/service.hpp"

#include <httplib.h>

#include <functional>
#include <string>
#include <thread>

namespace coverage {

class HttpFrontend {
public:
    explicit HttpFrontend(TaskService& service) : service_(service) {
        server_.set_tcp_nodelay(true);  // small JSON replies; don't wait on delayed ACKs
        routes();
    }
    ~HttpFrontend() { stop(); }
    HttpFrontend(const HttpFrontend&) = delete;
    HttpFrontend& operator=(const HttpFrontend&) = delete;

    // Binds an ephemeral port; returns it.
    int bind_any_port(const std::string& host = "127.0.0.1") {
        const int port = server_.bind_to_any_port(host);
        if (port < 0) throw ConfigError("cannot bind " + host);
        return port;
    }

    void bind(const std::string& host, int port) {
        if (!server_.bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    }

    // Serves on the calling thread until stop().
    void serve() { server_.listen_after_bind(); }

    void start() {
        thread_ = std::thread([this] { serve(); });
        server_.wait_until_ready();
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

private:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    static void send_json(httplib::Response& res, const json& body, int status = 200) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static Handler guarded(Handler h) {
        return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
            try {
                h(req, res);
            } catch (const NotFoundError& e) {
                send_json(res, {{"error", e.what()}}, 404);
            } catch (const ConfigError& e) {
                send_json(res, {{"error", e.what()}}, 400);
            } catch (const json::exception& e) {
                send_json(res, {{"error", e.what()}}, 400);
            } catch (const std::exception& e) {
                send_json(res, {{"error", e.what()}}, 500);
            }
        };
    }

    static json body_json(const httplib::Request& req) {
        return parse_json(req.body.empty() ? std::string("{}") : req.body, "request body");
    }

    static std::optional<std::string> param(const httplib::Request& req, const char* name) {
        if (!req.has_param(name)) return std::nullopt;
        return req.get_param_value(name);
    }

    void routes() {
        server_.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, {{"session_id", service_.create_session(body_json(req))}}, 201);
        }));

        server_.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, session_status_json(*service_.session(req.matches[1])->snapshot()));
        }));

        server_.Get(R"(/sessions/([^/]+)/tasks)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto s = service_.session(req.matches[1]);
            const auto status = param(req, "status").value_or("pending");
            const auto worker = param(req, "worker_id");
            auto snap = s->snapshot();
            std::vector<BoardTask> tasks;
            if (status == "pending") {
                tasks = s->open_tasks(worker);
                snap = s->snapshot();
            } else {
                static const std::map<std::string, std::optional<TaskStatus>> filters{
                    {"answering", TaskStatus::Answering}, {"resolved", TaskStatus::Resolved},
                    {"canceled", TaskStatus::Canceled}, {"all", std::nullopt}};
                auto f = filters.find(status);
                if (f == filters.end()) throw ConfigError("unknown status filter '" + status + "'");
                for (const auto& [seq, t] : snap->tasks)
                    if (!f->second || t.status == *f->second) tasks.push_back(t);
            }
            json out = json::array();
            for (const auto& t : tasks) out.push_back(task_to_json(*snap, t, s->collection()));
            send_json(res, out);
        }));

        server_.Post(R"(/tasks/([^/]+)/assignments)",
                     guarded([this](const httplib::Request& req, httplib::Response& res) {
                         const auto body = body_json(req);
                         if (!body.contains("worker_id") || !body["worker_id"].is_string())
                             throw ConfigError("assignment needs a string worker_id");
                         if (!body.contains("answer")) throw ConfigError("assignment needs an answer");
                         const auto r = service_.submit(req.matches[1], body["worker_id"].get<std::string>(),
                                                        body["answer"]);
                         json out{{"status", to_string(r.status)}, {"remaining_assignments", r.remaining}};
                         if (!r.reason.empty()) out["reason"] = r.reason;
                         send_json(res, out, r.status == SubmitStatus::Rejected ? 409 : 200);
                     }));

        server_.Get(R"(/items/([^/]+)/image)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            auto img = service_.image(req.matches[1], param(req, "session"));
            res.set_content(std::move(img.bytes), img.content_type);
        }));

        server_.Get(R"(/sessions/([^/]+)/log)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            res.set_content(service_.session(req.matches[1])->log_text(), "application/x-ndjson");
        }));
    }

    TaskService& service_;
    httplib::Server server_;
    std::thread thread_;
};

} // namespace coverage
