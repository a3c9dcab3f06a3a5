#include "unseen/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>

#include "unseen/errors.hpp"

extern char** environ;

namespace unseen {

namespace {

struct Pipe {
  int fds[2] = {-1, -1};
  Pipe() {
    if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(Errc::Io, std::string("pipe: ") + std::strerror(errno));
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  Pipe(const Pipe&) = delete;
  Pipe& operator=(const Pipe&) = delete;
  void close_read() {
    if (fds[0] >= 0) ::close(fds[0]);
    fds[0] = -1;
  }
  void close_write() {
    if (fds[1] >= 0) ::close(fds[1]);
    fds[1] = -1;
  }
};

}  // namespace

ProcessResult run_shell(const std::string& command, std::string_view input) {
  Pipe in, out, err;
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in.fds[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out.fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err.fds[1], STDERR_FILENO);

  const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw Error(Errc::Io, std::string("posix_spawn: ") + std::strerror(rc));

  in.close_read();
  out.close_write();
  err.close_write();

  // Writes to a child that exited early must not kill us.
  struct sigaction ignore {}, previous {};
  ignore.sa_handler = SIG_IGN;
  sigaction(SIGPIPE, &ignore, &previous);

  ProcessResult result;
  std::size_t written = 0;
  if (input.empty()) in.close_write();
  std::array<char, 4096> buf{};
  while (out.fds[0] >= 0 || err.fds[0] >= 0) {
    std::array<pollfd, 3> pfds{};
    nfds_t count = 0;
    if (in.fds[1] >= 0) pfds[count++] = {in.fds[1], POLLOUT, 0};
    if (out.fds[0] >= 0) pfds[count++] = {out.fds[0], POLLIN, 0};
    if (err.fds[0] >= 0) pfds[count++] = {err.fds[0], POLLIN, 0};
    if (::poll(pfds.data(), count, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (nfds_t k = 0; k < count; ++k) {
      if (pfds[k].revents == 0) continue;
      const int fd = pfds[k].fd;
      if (fd == in.fds[1]) {
        const ssize_t w = ::write(fd, input.data() + written, input.size() - written);
        if (w > 0) written += static_cast<std::size_t>(w);
        if (w < 0 || written == input.size()) in.close_write();
      } else {
        const ssize_t r = ::read(fd, buf.data(), buf.size());
        if (r > 0) {
          (fd == out.fds[0] ? result.out : result.err).append(buf.data(), static_cast<std::size_t>(r));
        } else {
          if (fd == out.fds[0]) out.close_read(); else err.close_read();
        }
      }
    }
  }
  in.close_write();
  sigaction(SIGPIPE, &previous, nullptr);

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  return result;
}

}  // namespace unseen
