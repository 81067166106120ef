#pragma once

// Line protocol client for an SMT-LIB 2 solver subprocess. The solver command
// runs under /bin/sh with both standard streams piped; :print-success is
// switched on immediately so every command has a reply and the client never
// desynchronizes. Replies are framed by parenthesis depth, so multi-line
// terms and models are read whole. A configurable timeout is enforced on
// every reply with poll(); on expiry the child is killed and the session
// becomes unusable.

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <chrono>
#include <string>

#include "qivc/util/error.hpp"
#include "qivc/util/sexpr.hpp"

namespace qivc::smt {

class SmtSession {
 public:
  explicit SmtSession(const std::string& command, int timeout_ms = 0)
      : timeout_ms_(timeout_ms) {
    signal(SIGPIPE, SIG_IGN);
    spawn(command);
    Sexpr r = query("(set-option :print-success true)");
    if (!(r.is_atom && r.atom == "success"))
      fail_solver("solver did not acknowledge :print-success: " + to_string(r));
  }

  SmtSession(const SmtSession&) = delete;
  SmtSession& operator=(const SmtSession&) = delete;

  ~SmtSession() {
    if (pid_ > 0) {
      if (!dead_) {
        const char* bye = "(exit)\n";
        ssize_t ignored = write(in_fd_, bye, 7);
        (void)ignored;
      }
      close(in_fd_);
      close(out_fd_);
      // give the child a moment to leave on its own, then insist
      for (int i = 0; i < 50; i++) {
        if (waitpid(pid_, nullptr, WNOHANG) != 0) return;
        usleep(2000);
      }
      kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
    }
  }

  void set_timeout(int ms) { timeout_ms_ = ms; }
  bool alive() const { return !dead_; }

  // Sends one command and returns the reply, which may be an error form.
  Sexpr query(const std::string& line) {
    send(line);
    return read_response();
  }

  // Sends one command and requires a success reply.
  void command(const std::string& line) {
    Sexpr r = query(line);
    if (r.is_atom && r.atom == "success") return;
    fail_solver("solver rejected '" + line + "': " + to_string(r));
  }

  static bool is_error(const Sexpr& r) {
    return r.is_list() && r.size() >= 1 && r[0].is_atom && r[0].atom == "error";
  }

  static std::string error_text(const Sexpr& r) {
    if (is_error(r) && r.size() >= 2) return r[1].atom;
    return to_string(r);
  }

 private:
  pid_t pid_ = -1;
  int in_fd_ = -1;   // child's stdin
  int out_fd_ = -1;  // child's stdout
  std::string buf_;
  int timeout_ms_;
  bool dead_ = false;

  void spawn(const std::string& command) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      fail_solver("could not create solver pipes");
    pid_ = fork();
    if (pid_ < 0) fail_solver("could not fork the solver process");
    if (pid_ == 0) {
      dup2(to_child[0], 0);
      dup2(from_child[1], 1);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
  }

  void die(const std::string& why) {
    if (!dead_) {
      dead_ = true;
      kill(pid_, SIGKILL);
    }
    fail_solver(why);
  }

  void send(const std::string& line) {
    if (dead_) fail_solver("solver session is no longer usable");
    std::string msg = line + "\n";
    size_t off = 0;
    while (off < msg.size()) {
      ssize_t n = write(in_fd_, msg.data() + off, msg.size() - off);
      if (n <= 0) die("solver stopped accepting input");
      off += static_cast<size_t>(n);
    }
  }

  Sexpr read_response() {
    using clock = std::chrono::steady_clock;
    auto start = clock::now();
    for (;;) {
      size_t end = scan_complete();
      if (end != 0) {
        std::string one = buf_.substr(0, end);
        buf_.erase(0, end);
        SexprReader rd(one);
        Sexpr s;
        if (!rd.next(s)) die("solver reply did not parse: " + one);
        return s;
      }
      int remain = -1;
      if (timeout_ms_ > 0) {
        auto spent = std::chrono::duration_cast<std::chrono::milliseconds>(
                         clock::now() - start)
                         .count();
        remain = timeout_ms_ - static_cast<int>(spent);
        if (remain <= 0) {
          dead_ = true;
          kill(pid_, SIGKILL);
          fail_resource("solver did not reply within the time limit");
        }
      }
      pollfd pf{out_fd_, POLLIN, 0};
      int pr = poll(&pf, 1, remain);
      if (pr == 0) continue;  // re-check the clock
      if (pr < 0) die("waiting for the solver failed");
      char chunk[4096];
      ssize_t n = read(out_fd_, chunk, sizeof chunk);
      if (n <= 0) die("solver exited before replying");
      buf_.append(chunk, static_cast<size_t>(n));
    }
  }

  // Returns the end offset of the first complete reply in buf_, or 0 if more
  // input is needed. A reply is one balanced s-expression or one bare atom;
  // either must be followed by at least one byte (the newline) so that a
  // prefix of a longer atom is never taken.
  size_t scan_complete() const {
    size_t i = 0, n = buf_.size();
    while (i < n && std::isspace(static_cast<unsigned char>(buf_[i]))) i++;
    if (i == n) return 0;
    if (buf_[i] == '(') {
      int depth = 0;
      bool in_str = false, in_bar = false;
      for (size_t j = i; j < n; j++) {
        char c = buf_[j];
        if (in_str) {
          if (c == '"') {
            if (j + 1 < n && buf_[j + 1] == '"') {
              j++;
              continue;
            }
            if (j + 1 == n) return 0;  // cannot tell escape from close yet
            in_str = false;
          }
        } else if (in_bar) {
          if (c == '|') in_bar = false;
        } else if (c == '"') {
          in_str = true;
        } else if (c == '|') {
          in_bar = true;
        } else if (c == ';') {
          while (j < n && buf_[j] != '\n') j++;
          if (j == n) return 0;
        } else if (c == '(') {
          depth++;
        } else if (c == ')') {
          depth--;
          if (depth == 0) return j + 1;
        }
      }
      return 0;
    }
    size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(buf_[j])) &&
           buf_[j] != '(' && buf_[j] != ')')
      j++;
    if (j == n) return 0;  // the atom may continue
    return j;
  }
};

}  // namespace qivc::smt
