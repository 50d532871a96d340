#pragma once

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "nyosh/parser.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(NYOSH_TEST_DATA); }

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "nyosh-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

// An unlinked temp file usable as an output descriptor.
class Capture {
 public:
  Capture() {
    char tmpl[] = "/tmp/nyosh-cap-XXXXXX";
    fd_ = mkstemp(tmpl);
    if (fd_ < 0) throw std::runtime_error("mkstemp failed");
    unlink(tmpl);
  }
  ~Capture() { close(fd_); }
  Capture(const Capture&) = delete;
  Capture& operator=(const Capture&) = delete;
  int fd() const { return fd_; }
  std::string text() const {
    std::string out;
    char buf[4096];
    off_t off = 0;
    for (;;) {
      ssize_t n = pread(fd_, buf, sizeof buf, off);
      if (n <= 0) break;
      out.append(buf, static_cast<std::size_t>(n));
      off += n;
    }
    return out;
  }

 private:
  int fd_ = -1;
};

struct ShellResult {
  int status = -1;
  std::string out;
};

// Runs `command` under /bin/sh -c; stdin is /dev/null, stdout captured.
inline ShellResult run_shell(const std::string& command, const fs::path& cwd = {}) {
  ShellResult r;
  Capture cap;
  pid_t pid = fork();
  if (pid == 0) {
    int devnull = open("/dev/null", O_RDONLY);
    dup2(devnull, 0);
    dup2(cap.fd(), 1);
    if (!cwd.empty() && chdir(cwd.c_str()) != 0) _exit(126);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  int st = 0;
  waitpid(pid, &st, 0);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : 128 + WTERMSIG(st);
  r.out = cap.text();
  return r;
}

inline std::string sh_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline nyosh::Script parse_or_die(const std::string& text, const std::string& file = "<test>") {
  auto r = nyosh::parse_script(text, file);
  if (!r.ok()) {
    std::string msg;
    for (const auto& e : r.errors) msg += nyosh::format_parse_error(e) + "\n";
    throw std::runtime_error("parse failed:\n" + msg);
  }
  return *r.script;
}

}  // namespace testing_support
