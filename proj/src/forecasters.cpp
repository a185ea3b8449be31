#include "tsfeatlime/forecasters.hpp"

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "tsfeatlime/errors.hpp"
#include "tsfeatlime/synthetic.hpp"

namespace tsfl {

// ---------------------------------------------------------------------------
// AR

ARModel ar_fit(std::span<const double> train, std::size_t order) {
    if (order == 0) throw ConfigError("AR order must be positive");
    if (train.size() <= order + 1) {
        throw FitError("AR(" + std::to_string(order) + ") needs more than " + std::to_string(order + 1) +
                       " training points, got " + std::to_string(train.size()));
    }
    const std::size_t rows = train.size() - order;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(order));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + order;
        y[static_cast<Eigen::Index>(r)] = train[t];
        for (std::size_t i = 0; i < order; ++i) {
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = train[t - 1 - i];
        }
    }
    const Eigen::RowVectorXd xbar = x.colwise().mean();
    const double ybar = y.mean();
    x.rowwise() -= xbar;
    y.array() -= ybar;

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
    cod.setThreshold(1e-12);
    const Eigen::VectorXd coef = cod.solve(y);
    if (!coef.allFinite()) throw FitError("AR fit produced non-finite coefficients");

    ARModel m;
    m.coefficients.assign(coef.data(), coef.data() + coef.size());
    m.intercept = ybar - xbar.dot(coef);
    return m;
}

double ar_predict(const ARModel& m, std::span<const double> window) {
    if (window.size() < m.order()) {
        throw DimensionError("AR(" + std::to_string(m.order()) + ") needs a window of at least that length, got " +
                             std::to_string(window.size()));
    }
    double out = m.intercept;
    const std::size_t q = window.size();
    for (std::size_t i = 0; i < m.order(); ++i) out += m.coefficients[i] * window[q - 1 - i];
    return out;
}

std::string ARForecaster::describe() const { return "ar:" + std::to_string(model_.order()); }

// ---------------------------------------------------------------------------
// Holt-Winters

void HoltWintersParams::validate() const {
    auto inside = [](double v) { return v > 0.0 && v < 1.0; };
    if (!inside(alpha) || !inside(beta)) throw ConfigError("Holt-Winters alpha and beta must lie in (0, 1)");
    if (gamma) {
        if (!inside(*gamma)) throw ConfigError("Holt-Winters gamma must lie in (0, 1)");
        if (season_length < 2) throw ConfigError("Holt-Winters season length must be at least 2");
    }
}

HoltWintersState hw_fit(std::span<const double> train, const HoltWintersParams& params) {
    params.validate();
    HoltWintersState s;
    if (!params.gamma) {
        if (train.size() < 2) throw FitError("Holt-Winters without seasonality needs at least 2 points");
        s.level = train[0];
        s.trend = train[1] - train[0];
        s.phase = 0;
        return hw_filter(s, train.subspan(1), params);
    }
    const std::size_t m = params.season_length;
    if (train.size() < 2 * m) {
        throw FitError("Holt-Winters needs at least two seasons (" + std::to_string(2 * m) +
                       " points), got " + std::to_string(train.size()));
    }
    double first = 0.0;
    double second = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        first += train[i];
        second += train[m + i];
    }
    first /= static_cast<double>(m);
    second /= static_cast<double>(m);
    s.trend = (second - first) / static_cast<double>(m);
    s.seasonals.resize(m);
    for (std::size_t i = 0; i < m; ++i) s.seasonals[i] = train[i] - first;
    s.level = first;
    s.phase = 0;
    return hw_filter(s, train.subspan(m), params);
}

HoltWintersState hw_filter(HoltWintersState s, std::span<const double> values, const HoltWintersParams& params) {
    const double a = params.alpha;
    const double b = params.beta;
    for (double y : values) {
        const double season = s.seasonals.empty() ? 0.0 : s.seasonals[s.phase];
        const double prev_level = s.level;
        s.level = a * (y - season) + (1.0 - a) * (s.level + s.trend);
        s.trend = b * (s.level - prev_level) + (1.0 - b) * s.trend;
        if (!s.seasonals.empty()) {
            const double g = *params.gamma;
            s.seasonals[s.phase] = g * (y - s.level) + (1.0 - g) * season;
            s.phase = (s.phase + 1) % s.seasonals.size();
        }
    }
    return s;
}

double hw_forecast(const HoltWintersState& s) noexcept {
    return s.level + s.trend + (s.seasonals.empty() ? 0.0 : s.seasonals[s.phase]);
}

double hw_fit_predict(std::span<const double> train, const HoltWintersParams& params,
                      std::span<const double> window) {
    return hw_forecast(hw_filter(hw_fit(train, params), window, params));
}

HoltWintersForecaster::HoltWintersForecaster(std::span<const double> train, HoltWintersParams params)
    : params_(params), fitted_(hw_fit(train, params_)) {}

double HoltWintersForecaster::predict(std::span<const double> window) const {
    return hw_forecast(hw_filter(fitted_, window, params_));
}

std::string HoltWintersForecaster::describe() const {
    char buf[128];
    std::snprintf(buf, sizeof buf, "hw:%g,%g,%g,%zu", params_.alpha, params_.beta,
                  params_.gamma ? *params_.gamma : 0.0, params_.gamma ? params_.season_length : std::size_t{0});
    return buf;
}

// ---------------------------------------------------------------------------
// External adapter

std::string format_adapter_request(std::span<const double> window) {
    std::string line;
    char buf[32];
    for (std::size_t i = 0; i < window.size(); ++i) {
        if (i) line.push_back(',');
        std::snprintf(buf, sizeof buf, "%.17g", window[i]);
        line += buf;
    }
    return line;
}

double parse_adapter_response(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.starts_with("ERR ")) throw AdapterError("adapter reported: " + std::string(line.substr(4)));
    std::string_view num = line;
    if (num.starts_with('+')) num.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
    if (num.empty() || ec != std::errc{} || ptr != num.data() + num.size() || !std::isfinite(v)) {
        throw AdapterError("adapter returned a malformed response: '" + std::string(line) + "'");
    }
    return v;
}

struct ExternalForecaster::Process {
    pid_t pid = -1;
    int to_child = -1;
    int from_child = -1;
    std::string buffer;
};

ExternalForecaster::ExternalForecaster(ExternalAdapterConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.command.empty()) throw ConfigError("external adapter command is empty");
    if (cfg_.timeout.count() <= 0) throw ConfigError("external adapter timeout must be positive");
    // A dead child must surface as EPIPE, not terminate the process.
    std::signal(SIGPIPE, SIG_IGN);
}

ExternalForecaster::~ExternalForecaster() {
    std::lock_guard lock(mutex_);
    stop();
}

void ExternalForecaster::start() const {
    int in_pipe[2];
    int out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0) throw AdapterError(std::string("pipe: ") + std::strerror(errno));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw AdapterError(std::string("pipe: ") + std::strerror(errno));
    }
    const pid_t pid = fork();
    if (pid < 0) throw AdapterError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        execl("/bin/sh", "sh", "-c", cfg_.command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    proc_ = std::make_unique<Process>();
    proc_->pid = pid;
    proc_->to_child = in_pipe[1];
    proc_->from_child = out_pipe[0];
}

void ExternalForecaster::stop() const {
    if (!proc_) return;
    if (proc_->to_child >= 0) ::close(proc_->to_child);
    if (proc_->from_child >= 0) ::close(proc_->from_child);
    if (proc_->pid > 0) {
        ::kill(proc_->pid, SIGKILL);
        int status = 0;
        ::waitpid(proc_->pid, &status, 0);
    }
    proc_.reset();
}

double ExternalForecaster::predict(std::span<const double> window) const {
    std::lock_guard lock(mutex_);
    if (!proc_) start();

    const std::string request = format_adapter_request(window) + "\n";
    std::size_t written = 0;
    while (written < request.size()) {
        const ssize_t n = ::write(proc_->to_child, request.data() + written, request.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            if (err == EPIPE) {
                // Usually the child already exited; report its status if it did.
                const auto deadline = std::chrono::steady_clock::now() + cfg_.timeout;
                int status = 0;
                pid_t done = 0;
                while ((done = ::waitpid(proc_->pid, &status, WNOHANG)) == 0 &&
                       std::chrono::steady_clock::now() < deadline) {
                    std::this_thread::sleep_for(std::chrono::milliseconds(5));
                }
                if (done == proc_->pid) {
                    proc_->pid = -1;
                    stop();
                    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
                    throw AdapterError("adapter '" + cfg_.command + "' exited with status " + std::to_string(code) +
                                       " before answering");
                }
            }
            stop();
            throw AdapterError("adapter '" + cfg_.command + "' rejected the request: " + std::strerror(err));
        }
        written += static_cast<std::size_t>(n);
    }

    const auto deadline = std::chrono::steady_clock::now() + cfg_.timeout;
    for (;;) {
        const auto nl = proc_->buffer.find('\n');
        if (nl != std::string::npos) {
            const std::string line = proc_->buffer.substr(0, nl);
            proc_->buffer.erase(0, nl + 1);
            try {
                return parse_adapter_response(line);
            } catch (const AdapterError&) {
                stop();
                throw;
            }
        }
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            stop();
            throw AdapterTimeout("adapter '" + cfg_.command + "' did not answer within " +
                                 std::to_string(cfg_.timeout.count()) + " ms");
        }
        pollfd pfd{proc_->from_child, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (ready < 0) {
            if (errno == EINTR) continue;
            stop();
            throw AdapterError(std::string("poll: ") + std::strerror(errno));
        }
        if (ready == 0) continue;
        char chunk[4096];
        const ssize_t n = ::read(proc_->from_child, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            stop();
            throw AdapterError(std::string("read: ") + std::strerror(errno));
        }
        if (n == 0) {
            int status = 0;
            ::close(proc_->to_child);
            proc_->to_child = -1;
            ::waitpid(proc_->pid, &status, 0);
            proc_->pid = -1;
            stop();
            const int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
            throw AdapterError("adapter '" + cfg_.command + "' exited with status " + std::to_string(code) +
                               " before answering");
        }
        proc_->buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

double external_forecast(const ExternalForecaster& adapter, std::span<const double> window) {
    return adapter.predict(window);
}

// ---------------------------------------------------------------------------

double LastValueForecaster::predict(std::span<const double> window) const {
    if (window.empty()) throw DimensionError("last-value forecaster needs a non-empty window");
    return window.back();
}

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

double to_real(std::string_view text, std::string_view what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError("model spec: invalid " + std::string(what) + " '" + std::string(text) + "'");
    }
    return v;
}

std::size_t to_count(std::string_view text, std::string_view what) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError("model spec: invalid " + std::string(what) + " '" + std::string(text) + "'");
    }
    return v;
}

}  // namespace

ModelSpec parse_model_spec(std::string_view text) {
    if (text == "last") return LastValueSpec{};
    if (text == "quad") return QuadraticARSpec{};
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw ConfigError("model spec '" + std::string(text) + "' must be ar:p, hw:a,b,g,season, ext:cmd, last or quad");
    }
    const std::string_view kind = text.substr(0, colon);
    const std::string_view rest = text.substr(colon + 1);
    if (kind == "ar") {
        const std::size_t p = to_count(rest, "AR order");
        if (p == 0) throw ConfigError("model spec: AR order must be positive");
        return ARSpec{p};
    }
    if (kind == "hw") {
        const auto parts = split(rest, ',');
        if (parts.size() != 4) throw ConfigError("model spec: hw expects alpha,beta,gamma,season");
        HoltWintersParams hp;
        hp.alpha = to_real(parts[0], "alpha");
        hp.beta = to_real(parts[1], "beta");
        const double g = to_real(parts[2], "gamma");
        hp.season_length = to_count(parts[3], "season length");
        if (g == 0.0) {
            hp.gamma.reset();
        } else {
            hp.gamma = g;
        }
        hp.validate();
        return hp;
    }
    if (kind == "ext") {
        if (rest.empty()) throw ConfigError("model spec: ext needs a command");
        return ExternalSpec{{std::string(rest), std::chrono::milliseconds{10'000}}};
    }
    throw ConfigError("unknown model kind '" + std::string(kind) + "'");
}

std::unique_ptr<Forecaster> make_forecaster(const ModelSpec& spec, std::span<const double> train) {
    struct Visitor {
        std::span<const double> train;
        std::unique_ptr<Forecaster> operator()(const ARSpec& s) const {
            return std::make_unique<ARForecaster>(ar_fit(train, s.order));
        }
        std::unique_ptr<Forecaster> operator()(const HoltWintersParams& p) const {
            return std::make_unique<HoltWintersForecaster>(train, p);
        }
        std::unique_ptr<Forecaster> operator()(const ExternalSpec& s) const {
            return std::make_unique<ExternalForecaster>(s.config);
        }
        std::unique_ptr<Forecaster> operator()(const LastValueSpec&) const {
            return std::make_unique<LastValueForecaster>();
        }
        std::unique_ptr<Forecaster> operator()(const QuadraticARSpec&) const {
            return std::make_unique<QuadraticARForecaster>();
        }
    };
    return std::visit(Visitor{train}, spec);
}

}  // namespace tsfl
