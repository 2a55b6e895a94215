#include "nounprobe/protocol.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <map>

#include "nounprobe/error.hpp"

namespace nounprobe {

using nlohmann::json;

namespace {

constexpr std::size_t kStderrTail = 8192;

void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(std::string("write to backend failed: ") + std::strerror(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

// Negative timeout waits forever.
std::optional<std::string> read_line(int fd, std::string& buffer, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto nl = buffer.find('\n'); nl != std::string::npos) {
      std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    int wait_ms = -1;
    if (timeout.count() >= 0) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw BackendError("timed out waiting for backend reply");
      wait_ms = static_cast<int>(left.count());
    }
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, wait_ms);
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw BackendError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) throw BackendError("timed out waiting for backend reply");
    char chunk[4096];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError(std::string("read from backend failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      if (buffer.empty()) return std::nullopt;
      std::string line;
      line.swap(buffer);
      return line;
    }
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

json error_reply(const json& id, const std::string& message) {
  return json{{"id", id}, {"ok", false}, {"error", message}};
}

std::vector<std::string> string_array(const json& req, const char* field) {
  const auto& v = req.at(field);
  if (!v.is_array()) throw BackendError(std::string("field '") + field + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& s : v) {
    if (!s.is_string()) throw BackendError(std::string("field '") + field + "' must be an array of strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

std::vector<double> score_array(const json& reply, std::size_t expected) {
  const auto it = reply.find("scores");
  if (it == reply.end() || !it->is_array()) throw BackendError("malformed reply: missing 'scores' array");
  if (it->size() != expected) {
    throw BackendError("malformed reply: " + std::to_string(it->size()) + " scores for " + std::to_string(expected) +
                       " inputs");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& s : *it) {
    if (!s.is_number()) throw BackendError("malformed reply: non-numeric score");
    out.push_back(s.get<double>());
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- server

json ProtocolServer::dispatch(const json& req) {
  const auto op_it = req.find("op");
  if (op_it == req.end() || !op_it->is_string()) throw BackendError("request has no 'op'");
  const std::string op = op_it->get<std::string>();
  const CapabilitySet caps = backend_.capabilities();
  const auto need = [&](Capability c) {
    if (!caps.has(c)) throw BackendError("unsupported op '" + op + "'");
  };

  json r = json::object();
  if (op == "hello") {
    if (req.contains("version") && req["version"] != kProtocolVersion) {
      throw BackendError("protocol version mismatch: server speaks " + std::to_string(kProtocolVersion));
    }
    r["version"] = kProtocolVersion;
    r["backend_id"] = backend_.id();
    r["capabilities"] = caps.names();
  } else if (op == "score_strings") {
    need(Capability::FullString);
    r["scores"] = backend_.score_strings(string_array(req, "strings"));
  } else if (op == "score_masked") {
    need(Capability::Masked);
    MaskedQuery q{req.at("left").get<std::string>(), req.at("right").get<std::string>(),
                  string_array(req, "candidates")};
    r["scores"] = backend_.score_masked(q);
  } else if (op == "tokenize") {
    need(Capability::Tokenize);
    json tokens = json::array();
    for (const auto& t : backend_.tokenize(string_array(req, "words"))) {
      tokens.push_back(json{{"count", t.count}, {"unknown", t.unknown}});
    }
    r["tokens"] = std::move(tokens);
  } else if (op == "fine_tune") {
    need(Capability::FineTune);
    const auto& epochs = req.at("epochs");
    if (!epochs.is_number_integer()) throw BackendError("'epochs' must be an integer");
    backend_.fine_tune(string_array(req, "sentences"), epochs.get<int>());
  } else if (op == "add_token") {
    need(Capability::AddToken);
    backend_.add_token(req.at("surface").get<std::string>());
  } else if (op == "reset") {
    need(Capability::Reset);
    backend_.reset();
  } else if (op == "shutdown") {
    shutdown_ = true;
  } else {
    throw BackendError("unsupported op '" + op + "'");
  }
  return r;
}

std::string ProtocolServer::handle(std::string_view line) {
  json req;
  try {
    req = json::parse(line);
  } catch (const json::exception& e) {
    return error_reply(nullptr, std::string("malformed request: ") + e.what()).dump();
  }
  if (!req.is_object() || !req.contains("id") || !req["id"].is_number_integer()) {
    return error_reply(nullptr, "request needs an integer 'id'").dump();
  }
  const json id = req["id"];
  try {
    json r = dispatch(req);
    r["id"] = id;
    r["ok"] = true;
    return r.dump();
  } catch (const std::exception& e) {
    return error_reply(id, e.what()).dump();
  }
}

void ProtocolServer::serve(std::istream& in, std::ostream& out) {
  std::string line;
  while (!shutdown_ && std::getline(in, line)) {
    if (line.empty()) continue;
    out << handle(line) << '\n' << std::flush;
  }
}

void serve_tcp(ProtocolServer& server, std::uint16_t port, const std::function<void(std::uint16_t)>& on_listening) {
  ignore_sigpipe();
  const int listener = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listener < 0) throw BackendError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listener, 4) < 0) {
    const std::string msg = std::strerror(errno);
    ::close(listener);
    throw BackendError("cannot listen on port " + std::to_string(port) + ": " + msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  if (on_listening) on_listening(ntohs(addr.sin_port));

  while (!server.shutdown_requested()) {
    const int conn = ::accept4(listener, nullptr, nullptr, SOCK_CLOEXEC);
    if (conn < 0) {
      if (errno == EINTR) continue;
      break;
    }
    std::string buffer;
    try {
      while (!server.shutdown_requested()) {
        auto line = read_line(conn, buffer, std::chrono::milliseconds(-1));
        if (!line) break;
        if (line->empty()) continue;
        write_all(conn, server.handle(*line) + "\n");
      }
    } catch (const BackendError&) {
      // peer went away; wait for the next connection
    }
    ::close(conn);
  }
  ::close(listener);
}

// ---------------------------------------------------------------- transports

SubprocessTransport::SubprocessTransport(std::vector<std::string> argv) {
  if (argv.empty()) throw ConfigError("backend command is empty");
  ignore_sigpipe();
  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (::pipe2(in_pipe, O_CLOEXEC) < 0 || ::pipe2(out_pipe, O_CLOEXEC) < 0 || ::pipe2(err_pipe, O_CLOEXEC) < 0) {
    throw BackendError(std::string("pipe: ") + std::strerror(errno));
  }
  std::vector<char*> cargv;
  for (auto& a : argv) cargv.push_back(a.data());
  cargv.push_back(nullptr);

  pid_ = ::fork();
  if (pid_ < 0) throw BackendError(std::string("fork: ") + std::strerror(errno));
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    ::execvp(cargv[0], cargv.data());
    const std::string msg = std::string("exec ") + cargv[0] + " failed: " + std::strerror(errno) + "\n";
    (void)!::write(STDERR_FILENO, msg.data(), msg.size());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  err_child_ = err_pipe[0];
  err_reader_ = std::thread([this] {
    char chunk[1024];
    for (;;) {
      const ssize_t n = ::read(err_child_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        std::lock_guard lock(err_mu_);
        err_eof_ = true;
        err_cv_.notify_all();
        return;
      }
      std::lock_guard lock(err_mu_);
      stderr_tail_.append(chunk, static_cast<std::size_t>(n));
      if (stderr_tail_.size() > kStderrTail) stderr_tail_.erase(0, stderr_tail_.size() - kStderrTail);
    }
  });
}

SubprocessTransport::~SubprocessTransport() {
  if (to_child_ >= 0) ::close(to_child_);
  if (pid_ > 0) {
    int status = 0;
    bool exited = false;
    for (int i = 0; i < 100 && !exited; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        exited = true;
      } else {
        ::usleep(10000);
      }
    }
    if (!exited) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
  }
  if (err_reader_.joinable()) err_reader_.join();
  if (from_child_ >= 0) ::close(from_child_);
  if (err_child_ >= 0) ::close(err_child_);
}

void SubprocessTransport::send(std::string_view line) {
  std::string data(line);
  data.push_back('\n');
  try {
    write_all(to_child_, data);
  } catch (const BackendError& e) {
    drain_stderr();
    throw BackendError(std::string(e.what()) + "; backend stderr: " + diagnostics());
  }
}

std::optional<std::string> SubprocessTransport::receive(std::chrono::milliseconds timeout) {
  auto line = read_line(from_child_, buffer_, timeout);
  if (!line) drain_stderr();
  return line;
}

void SubprocessTransport::drain_stderr() const {
  std::unique_lock lock(err_mu_);
  err_cv_.wait_for(lock, std::chrono::seconds(2), [this] { return err_eof_; });
}

std::string SubprocessTransport::diagnostics() const {
  std::lock_guard lock(err_mu_);
  return stderr_tail_;
}

TcpTransport::TcpTransport(const std::string& host, std::uint16_t port) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw BackendError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  for (auto* p = res; p; p = p->ai_next) {
    fd_ = ::socket(p->ai_family, p->ai_socktype | SOCK_CLOEXEC, p->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw BackendError("cannot connect to " + host + ":" + service);
}

TcpTransport::~TcpTransport() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpTransport::send(std::string_view line) {
  std::string data(line);
  data.push_back('\n');
  write_all(fd_, data);
}

std::optional<std::string> TcpTransport::receive(std::chrono::milliseconds timeout) {
  return read_line(fd_, buffer_, timeout);
}

std::optional<std::string> LoopbackTransport::receive(std::chrono::milliseconds) {
  if (replies_.empty()) return std::nullopt;
  std::string out;
  if (reverse_) {
    out = std::move(replies_.back());
    replies_.pop_back();
  } else {
    out = std::move(replies_.front());
    replies_.pop_front();
  }
  return out;
}

// ---------------------------------------------------------------- client

ProtocolClient::ProtocolClient(std::unique_ptr<Transport> transport, ClientOptions opts)
    : transport_(std::move(transport)), opts_(opts) {
  if (opts_.window == 0) opts_.window = 1;
  if (opts_.batch_size == 0) opts_.batch_size = 1;
  const json reply = call(json{{"op", "hello"}, {"version", kProtocolVersion}});
  const auto v = reply.find("version");
  if (v == reply.end() || !v->is_number_integer()) throw BackendError("handshake: reply missing protocol version");
  if (v->get<int>() != kProtocolVersion) {
    throw BackendError("handshake: protocol version mismatch (peer " + std::to_string(v->get<int>()) + ", harness " +
                       std::to_string(kProtocolVersion) + ")");
  }
  const auto id = reply.find("backend_id");
  if (id == reply.end() || !id->is_string()) throw BackendError("handshake: reply missing backend_id");
  peer_id_ = id->get<std::string>();
  backend_id_ = opts_.id.empty() ? peer_id_ : opts_.id;
  const auto caps = reply.find("capabilities");
  if (caps == reply.end() || !caps->is_array()) throw BackendError("handshake: reply missing capabilities");
  for (const auto& c : *caps) {
    const auto cap = c.is_string() ? parse_capability(c.get<std::string>()) : std::nullopt;
    if (!cap) throw BackendError("handshake: unknown capability " + c.dump());
    caps_.insert(*cap);
  }
}

ProtocolClient::~ProtocolClient() {
  try {
    shutdown();
  } catch (...) {
  }
}

void ProtocolClient::shutdown() {
  std::lock_guard lock(mu_);
  if (closed_) return;
  closed_ = true;
  json req{{"id", next_id_++}, {"op", "shutdown"}};
  transport_->send(req.dump());
  (void)transport_->receive(std::chrono::milliseconds(2000));
}

void ProtocolClient::require(Capability c, std::string_view op) const {
  if (!caps_.has(c)) throw BackendError("backend " + backend_id_ + " does not support " + std::string(op));
}

std::vector<json> ProtocolClient::call_many(std::vector<json> requests) {
  std::lock_guard lock(mu_);
  return call_many_locked(std::move(requests));
}

json ProtocolClient::call(json request) {
  std::vector<json> one;
  one.push_back(std::move(request));
  return std::move(call_many(std::move(one)).front());
}

std::vector<json> ProtocolClient::call_many_locked(std::vector<json> requests) {
  if (closed_) throw BackendError("connection to backend is closed");
  const std::size_t n = requests.size();
  std::vector<json> replies(n);
  std::map<std::int64_t, std::size_t> pending;
  std::size_t sent = 0;
  std::size_t received = 0;
  while (received < n) {
    while (sent < n && sent - received < opts_.window) {
      const std::int64_t id = next_id_++;
      requests[sent]["id"] = id;
      pending.emplace(id, sent);
      transport_->send(requests[sent].dump());
      ++sent;
    }
    auto line = transport_->receive(opts_.timeout);
    if (!line) {
      closed_ = true;
      throw BackendError("backend " + backend_id_ + " closed the connection; stderr: " + transport_->diagnostics());
    }
    json reply;
    try {
      reply = json::parse(*line);
    } catch (const json::exception&) {
      throw BackendError("malformed reply: " + line->substr(0, 200));
    }
    const auto id = reply.find("id");
    if (!reply.is_object() || id == reply.end() || !id->is_number_integer()) {
      if (reply.is_object() && reply.value("ok", true) == false) {
        throw BackendError("backend rejected request: " + reply.value("error", std::string("unknown error")));
      }
      throw BackendError("malformed reply without id: " + line->substr(0, 200));
    }
    auto it = pending.find(id->get<std::int64_t>());
    if (it == pending.end()) throw BackendError("reply for unknown request id " + id->dump());
    replies[it->second] = std::move(reply);
    pending.erase(it);
    ++received;
  }
  for (const auto& r : replies) {
    const auto ok = r.find("ok");
    if (ok == r.end() || !ok->is_boolean()) throw BackendError("malformed reply: missing 'ok'");
    if (!ok->get<bool>()) throw BackendError("backend error: " + r.value("error", std::string("unknown error")));
  }
  return replies;
}

std::vector<double> ProtocolClient::score_strings(std::span<const std::string> strings) {
  require(Capability::FullString, "score_strings");
  std::vector<json> requests;
  std::vector<std::size_t> sizes;
  for (std::size_t start = 0; start < strings.size(); start += opts_.batch_size) {
    const std::size_t len = std::min(opts_.batch_size, strings.size() - start);
    json batch = json::array();
    for (std::size_t i = 0; i < len; ++i) batch.push_back(strings[start + i]);
    requests.push_back(json{{"op", "score_strings"}, {"strings", std::move(batch)}});
    sizes.push_back(len);
  }
  const auto replies = call_many(std::move(requests));
  std::vector<double> out;
  out.reserve(strings.size());
  for (std::size_t i = 0; i < replies.size(); ++i) {
    auto s = score_array(replies[i], sizes[i]);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

std::vector<double> ProtocolClient::score_masked(const MaskedQuery& query) {
  return score_masked_batch(std::span<const MaskedQuery>(&query, 1)).front();
}

std::vector<std::vector<double>> ProtocolClient::score_masked_batch(std::span<const MaskedQuery> queries) {
  require(Capability::Masked, "score_masked");
  std::vector<json> requests;
  for (const auto& q : queries) {
    requests.push_back(
        json{{"op", "score_masked"}, {"left", q.left}, {"right", q.right}, {"candidates", q.candidates}});
  }
  const auto replies = call_many(std::move(requests));
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < replies.size(); ++i) out.push_back(score_array(replies[i], queries[i].candidates.size()));
  return out;
}

std::vector<TokenInfo> ProtocolClient::tokenize(std::span<const std::string> words) {
  require(Capability::Tokenize, "tokenize");
  std::vector<json> requests;
  std::vector<std::size_t> sizes;
  for (std::size_t start = 0; start < words.size(); start += opts_.batch_size) {
    const std::size_t len = std::min(opts_.batch_size, words.size() - start);
    requests.push_back(json{{"op", "tokenize"},
                            {"words", std::vector<std::string>(words.begin() + static_cast<std::ptrdiff_t>(start),
                                                               words.begin() + static_cast<std::ptrdiff_t>(start + len))}});
    sizes.push_back(len);
  }
  const auto replies = call_many(std::move(requests));
  std::vector<TokenInfo> out;
  for (std::size_t i = 0; i < replies.size(); ++i) {
    const auto it = replies[i].find("tokens");
    if (it == replies[i].end() || !it->is_array() || it->size() != sizes[i]) {
      throw BackendError("malformed tokenize reply");
    }
    for (const auto& t : *it) {
      if (!t.is_object() || !t.contains("count") || !t["count"].is_number_integer() || !t.contains("unknown") ||
          !t["unknown"].is_boolean()) {
        throw BackendError("malformed tokenize reply entry " + t.dump());
      }
      out.push_back(TokenInfo{t["count"].get<int>(), t["unknown"].get<bool>()});
    }
  }
  return out;
}

void ProtocolClient::fine_tune(std::span<const std::string> sentences, int epochs) {
  require(Capability::FineTune, "fine_tune");
  call(json{{"op", "fine_tune"},
            {"sentences", std::vector<std::string>(sentences.begin(), sentences.end())},
            {"epochs", epochs}});
}

void ProtocolClient::add_token(std::string_view surface) {
  require(Capability::AddToken, "add_token");
  call(json{{"op", "add_token"}, {"surface", std::string(surface)}});
}

void ProtocolClient::reset() {
  require(Capability::Reset, "reset");
  call(json{{"op", "reset"}});
}

}  // namespace nounprobe
