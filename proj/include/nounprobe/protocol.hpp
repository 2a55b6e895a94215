#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "nounprobe/backend.hpp"

namespace nounprobe {

inline constexpr int kProtocolVersion = 1;

// Serves one Backend over newline-delimited JSON. Requests look like
// {"id": 7, "op": "score_strings", "strings": [...]}; replies echo the id
// with "ok": true plus op-specific fields, or "ok": false and "error".
class ProtocolServer {
 public:
  explicit ProtocolServer(Backend& backend) : backend_(backend) {}

  // One request line in, one reply line out (without the newline).
  std::string handle(std::string_view line);
  bool shutdown_requested() const { return shutdown_; }

  // Reads requests until EOF or shutdown.
  void serve(std::istream& in, std::ostream& out);

 private:
  nlohmann::json dispatch(const nlohmann::json& req);

  Backend& backend_;
  bool shutdown_ = false;
};

// Accepts connections on 127.0.0.1:`port` (0 picks a free port) and serves
// them one after another until a client sends shutdown. `on_listening`
// receives the bound port.
void serve_tcp(ProtocolServer& server, std::uint16_t port, const std::function<void(std::uint16_t)>& on_listening);

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(std::string_view line) = 0;
  // Next reply line, nullopt at end of stream. Throws BackendError on timeout.
  virtual std::optional<std::string> receive(std::chrono::milliseconds timeout) = 0;
  // Anything the peer wrote to stderr, for crash reports.
  virtual std::string diagnostics() const { return {}; }
};

// Launches argv[0] with argv[1..] and talks over its stdin/stdout.
class SubprocessTransport final : public Transport {
 public:
  explicit SubprocessTransport(std::vector<std::string> argv);
  ~SubprocessTransport() override;
  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  void send(std::string_view line) override;
  std::optional<std::string> receive(std::chrono::milliseconds timeout) override;
  std::string diagnostics() const override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  int err_child_ = -1;
  std::string buffer_;
  // Waits briefly for the child's stderr to hit EOF so a crash message is complete.
  void drain_stderr() const;

  mutable std::mutex err_mu_;
  mutable std::condition_variable err_cv_;
  bool err_eof_ = false;
  std::string stderr_tail_;
  std::thread err_reader_;
};

class TcpTransport final : public Transport {
 public:
  TcpTransport(const std::string& host, std::uint16_t port);
  ~TcpTransport() override;
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  void send(std::string_view line) override;
  std::optional<std::string> receive(std::chrono::milliseconds timeout) override;

 private:
  int fd_ = -1;
  std::string buffer_;
};

// In-process transport feeding a ProtocolServer directly. With
// reverse_replies, queued replies are handed back newest first.
class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(ProtocolServer& server, bool reverse_replies = false)
      : server_(server), reverse_(reverse_replies) {}

  void send(std::string_view line) override { replies_.push_back(server_.handle(line)); }
  std::optional<std::string> receive(std::chrono::milliseconds) override;

 private:
  ProtocolServer& server_;
  bool reverse_;
  std::deque<std::string> replies_;
};

struct ClientOptions {
  std::size_t window = 8;  // outstanding pipelined requests
  std::size_t batch_size = 64;
  std::chrono::milliseconds timeout{60000};
  std::string id;  // reported id; the peer's own id when empty
};

// Backend speaking the wire protocol. The constructor performs the hello
// handshake and pins the capabilities the peer declared.
class ProtocolClient final : public Backend {
 public:
  explicit ProtocolClient(std::unique_ptr<Transport> transport, ClientOptions opts = {});
  ~ProtocolClient() override;

  const std::string& id() const override { return backend_id_; }
  const std::string& peer_id() const { return peer_id_; }
  CapabilitySet capabilities() const override { return caps_; }
  std::vector<double> score_strings(std::span<const std::string> strings) override;
  std::vector<double> score_masked(const MaskedQuery& query) override;
  std::vector<std::vector<double>> score_masked_batch(std::span<const MaskedQuery> queries) override;
  std::vector<TokenInfo> tokenize(std::span<const std::string> words) override;
  void fine_tune(std::span<const std::string> sentences, int epochs) override;
  void add_token(std::string_view surface) override;
  void reset() override;

  // Asks the peer to exit. Further calls fail.
  void shutdown();

  // Sends requests (ids assigned here) with up to `window` in flight and
  // returns the replies in request order, whatever order they arrive in.
  std::vector<nlohmann::json> call_many(std::vector<nlohmann::json> requests);
  nlohmann::json call(nlohmann::json request);

 private:
  void require(Capability c, std::string_view op) const;
  std::vector<nlohmann::json> call_many_locked(std::vector<nlohmann::json> requests);

  std::unique_ptr<Transport> transport_;
  ClientOptions opts_;
  std::mutex mu_;
  std::int64_t next_id_ = 1;
  std::string backend_id_;
  std::string peer_id_;
  CapabilitySet caps_;
  bool closed_ = false;
};

}  // namespace nounprobe
