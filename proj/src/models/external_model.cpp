#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <csignal>
#include <cstring>

#include "voxbench/models.hpp"

namespace voxbench {

namespace {

void write_all(int fd, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  while (n > 0) {
    const ssize_t w = ::write(fd, p, n);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) throw Error(ErrorCode::io, "external model: write failed");
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

void read_all(int fd, void* data, std::size_t n) {
  auto* p = static_cast<std::uint8_t*>(data);
  while (n > 0) {
    const ssize_t r = ::read(fd, p, n);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) throw Error(ErrorCode::io, "external model: process closed its output");
    p += r;
    n -= static_cast<std::size_t>(r);
  }
}

}  // namespace

ExternalProcessModel::ExternalProcessModel(std::string name, std::vector<std::string> argv)
    : desc_{std::move(name), ModelFamily::gan_like, OperatesOn::image_patch, true, false} {
  if (argv.empty()) throw Error(ErrorCode::parameter, "external model needs a command");
  static_assert(std::endian::native == std::endian::little, "float payloads assume a little-endian host");
  std::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw Error(ErrorCode::io, "pipe failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw Error(ErrorCode::io, "pipe failed");
  }
  std::vector<char*> cargv;
  for (auto& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);
  const pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorCode::io, "fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execvp(cargv[0], cargv.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ExternalProcessModel::~ExternalProcessModel() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

Patch ExternalProcessModel::translate(const Patch& source, const Index3&) const {
  std::lock_guard lock(mutex_);
  const std::uint64_t bytes = source.size() * sizeof(float);
  const std::uint64_t header = bytes;
  write_all(to_child_, &header, sizeof header);
  write_all(to_child_, source.values().data(), bytes);
  std::uint64_t reply = 0;
  read_all(from_child_, &reply, sizeof reply);
  if (reply != bytes)
    throw Error(ErrorCode::contract, "external model replied with " + std::to_string(reply) + " bytes, expected " +
                                         std::to_string(bytes));
  Patch out(source.dims());
  read_all(from_child_, out.values().data(), bytes);
  return out;
}

}  // namespace voxbench
