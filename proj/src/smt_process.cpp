// External solver driver: one /bin/sh child per query, script on stdin.
#include "pspi/error.hpp"
#include "pspi/smt.hpp"

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#ifndef PSPI_DEFAULT_SOLVER
#define PSPI_DEFAULT_SOLVER ""
#endif

namespace pspi {

std::string default_solver_command() {
    if (const char* env = std::getenv("PSPI_SMT_SOLVER"); env && *env) return env;
    const std::string built = PSPI_DEFAULT_SOLVER;
    return built.empty() ? "z3 -in" : built;
}

namespace {

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

std::string render(const Sexp& e) {
    if (!e.is_list) return e.atom;
    std::string out = "(";
    for (std::size_t i = 0; i < e.list.size(); ++i) {
        if (i) out += " ";
        out += render(e.list[i]);
    }
    return out + ")";
}

void collect_model(const Sexp& e, std::map<std::string, std::string>& model) {
    if (!e.is_list) return;
    if (e.list.size() == 5 && !e.list[0].is_list && e.list[0].atom == "define-fun" && !e.list[1].is_list) {
        model[e.list[1].atom] = render(e.list[4]);
        return;
    }
    for (const auto& child : e.list) collect_model(child, model);
}

SolverVerdict interpret(const std::string& output) {
    std::vector<Sexp> items;
    try {
        items = parse_sexps(output);
    } catch (const std::exception& e) {
        throw SolverError(std::string("unreadable solver output: ") + e.what());
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        const Sexp& it = items[i];
        if (it.is_list) {
            if (!it.list.empty() && !it.list[0].is_list && it.list[0].atom == "error")
                throw SolverError("solver error: " + render(it));
            continue;
        }
        SolverVerdict v;
        if (it.atom == "sat") {
            v.status = SmtStatus::Sat;
            std::map<std::string, std::string> model;
            if (i + 1 < items.size() && items[i + 1].is_list) collect_model(items[i + 1], model);
            v.model = std::move(model);
        } else if (it.atom == "unsat") {
            v.status = SmtStatus::Unsat;
        } else if (it.atom == "unknown") {
            v.status = SmtStatus::Unknown;
        } else if (it.atom == "timeout") {
            v.status = SmtStatus::Timeout;
        } else {
            throw SolverError("unexpected solver output '" + it.atom + "'");
        }
        return v;
    }
    throw SolverError("solver printed no verdict");
}

} // namespace

SolverVerdict solve(const std::string& script, const std::string& solver_command, double timeout_s) {
    const auto start = std::chrono::steady_clock::now();
    const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(timeout_s));
    int in_pair[2], out_pair[2];
    // Sockets rather than pipes so that a dead child surfaces as EPIPE, not SIGPIPE.
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, in_pair) != 0) throw SolverError("socketpair failed");
    Fd in_parent(in_pair[0]), in_child(in_pair[1]);
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, out_pair) != 0) throw SolverError("socketpair failed");
    Fd out_parent(out_pair[0]), out_child(out_pair[1]);

    const pid_t pid = ::fork();
    if (pid < 0) throw SolverError("fork failed");
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(in_child.fd, STDIN_FILENO);
        ::dup2(out_child.fd, STDOUT_FILENO);
        const int devnull = ::open("/dev/null", O_WRONLY);
        if (devnull >= 0) ::dup2(devnull, STDERR_FILENO);
        ::close(in_parent.fd);
        ::close(out_parent.fd);
        ::execl("/bin/sh", "sh", "-c", solver_command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    in_child.reset();
    out_child.reset();
    ::fcntl(in_parent.fd, F_SETFL, O_NONBLOCK);
    ::fcntl(out_parent.fd, F_SETFL, O_NONBLOCK);

    std::string output;
    std::size_t written = 0;
    bool timed_out = false;
    bool write_failed = false;
    if (script.empty()) in_parent.reset();
    while (out_parent.fd >= 0) {
        const auto now = std::chrono::steady_clock::now();
        if (now >= deadline) {
            timed_out = true;
            break;
        }
        pollfd fds[2];
        nfds_t n = 0;
        fds[n++] = {out_parent.fd, POLLIN, 0};
        if (in_parent.fd >= 0) fds[n++] = {in_parent.fd, POLLOUT, 0};
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
        const int rc = ::poll(fds, n, static_cast<int>(std::min<long long>(left + 1, 1000)));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (n == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
            const ssize_t k = ::send(in_parent.fd, script.data() + written, script.size() - written, MSG_NOSIGNAL);
            if (k > 0) written += static_cast<std::size_t>(k);
            else if (k < 0 && errno != EAGAIN && errno != EINTR) write_failed = true;
            if (written == script.size() || write_failed) {
                ::shutdown(in_parent.fd, SHUT_WR);
                in_parent.reset();
            }
        }
        if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
            char buf[4096];
            const ssize_t k = ::read(out_parent.fd, buf, sizeof buf);
            if (k > 0) output.append(buf, static_cast<std::size_t>(k));
            else if (k == 0 || (errno != EAGAIN && errno != EINTR)) out_parent.reset();
        }
    }
    if (timed_out) ::kill(-pid, SIGKILL);
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (timed_out) ::kill(-pid, SIGKILL);  // stragglers in the group
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (timed_out) {
        SolverVerdict v;
        v.status = SmtStatus::Timeout;
        v.wall_time = elapsed;
        return v;
    }
    if (WIFSIGNALED(status))
        throw SolverError("solver terminated by signal " + std::to_string(WTERMSIG(status)));
    if (WIFEXITED(status) && WEXITSTATUS(status) == 127)
        throw SolverError("could not launch solver '" + solver_command + "'");
    SolverVerdict v = interpret(output);
    v.wall_time = elapsed;
    return v;
}

} // namespace pspi
