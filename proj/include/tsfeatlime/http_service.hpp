#pragma once

#include <memory>
#include <string>

#include "tsfeatlime/service.hpp"

namespace tsfl {

/// JSON-over-HTTP front end for an ExerciseStudy.
///
///   POST /api/session                     {group, participant, background?, seed?}
///   GET  /api/session/{id}
///   GET  /api/session/{id}/round/{r}
///   POST /api/session/{id}/answer         {round, question, choice}
///   POST /api/whatif                      {session, round?, t*|month, direction, delta?}
///   GET  /api/export                      text/csv
///
/// Errors are returned as {"code", "message"}.
class StudyServer {
public:
    explicit StudyServer(ExerciseStudy& study, std::string static_dir = {});
    ~StudyServer();

    StudyServer(const StudyServer&) = delete;
    StudyServer& operator=(const StudyServer&) = delete;

    /// Binds to an ephemeral port and returns it (or -1).
    int bind_any_port(const std::string& host = "127.0.0.1");
    bool bind(const std::string& host, int port);
    /// Blocks until stop() is called.
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace tsfl
