#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "gdfo/errors.hpp"
#include "gdfo/models.hpp"

namespace gdfo {

// ---------------------------------------------------------------------------
// Wire protocol: length-prefixed little-endian binary frames.
//
//   frame   := u32 body_length, body
//   body    := u32 version, u8 message_type, u64 request_id, payload
//
//   InferenceRequest (type 1):
//     u32 n_items, u32 prompt_width
//     per item: f64[prompt_width] prompt, u32 n_tokens, u32[n_tokens] ids
//   InferenceResponse (type 2):
//     u32 n_items, u32 n_classes, per item f64[n_classes] logits,
//     u64 calls_remaining
//   StatusRequest (type 3): empty payload
//   StatusResponse (type 4): u64 calls_used, u64 budget, u64 checksum
//   Error (type 5): u32 code, u32 text_length, text bytes
//
// One InferenceRequest is one metered API call regardless of how many items
// it carries; the fitness of a CMA-ES candidate over a whole k-shot batch
// costs a single call, matching how a batched inference API bills.
// ---------------------------------------------------------------------------

enum class MessageType : std::uint8_t {
    kInferenceRequest = 1,
    kInferenceResponse = 2,
    kStatusRequest = 3,
    kStatusResponse = 4,
    kError = 5,
};

enum class WireErrorCode : std::uint32_t {
    kBudgetExhausted = 1,
    kMalformed = 2,
    kInternal = 3,
};

constexpr std::uint32_t kWireVersion = 1;
constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

struct InferenceItem {
    std::vector<double> prompt;
    std::vector<int> token_ids;
};

struct InferenceRequest {
    std::uint64_t request_id = 0;
    std::vector<InferenceItem> items;
};

struct InferenceResponse {
    std::uint64_t request_id = 0;
    std::vector<std::vector<double>> logits;  // one entry per item
    std::uint64_t calls_remaining = 0;
};

struct ServiceStatus {
    std::uint64_t calls_used = 0;
    std::uint64_t budget = 0;
    std::uint64_t checksum = 0;
};

// Field-level schema description, used by the information-firewall test to
// prove the wire carries nothing but token ids, prompt values, logits and
// counters — no field exists that could transport parameters or gradients.
struct WireField {
    const char* message;
    const char* field;
    const char* type;
};

inline std::vector<WireField> wire_schema() {
    return {
        {"InferenceRequest", "request_id", "u64"},
        {"InferenceRequest", "n_items", "u32"},
        {"InferenceRequest", "prompt_width", "u32"},
        {"InferenceRequest", "item.prompt", "f64[prompt_width]"},
        {"InferenceRequest", "item.n_tokens", "u32"},
        {"InferenceRequest", "item.token_ids", "u32[n_tokens]"},
        {"InferenceResponse", "request_id", "u64"},
        {"InferenceResponse", "n_items", "u32"},
        {"InferenceResponse", "n_classes", "u32"},
        {"InferenceResponse", "item.logits", "f64[n_classes]"},
        {"InferenceResponse", "calls_remaining", "u64"},
        {"StatusRequest", "request_id", "u64"},
        {"StatusResponse", "request_id", "u64"},
        {"StatusResponse", "calls_used", "u64"},
        {"StatusResponse", "budget", "u64"},
        {"StatusResponse", "checksum", "u64"},
        {"Error", "request_id", "u64"},
        {"Error", "code", "u32"},
        {"Error", "text", "bytes"},
    };
}

namespace wire {

class Writer {
  public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes_.insert(bytes_.end(), b, b + n);
    }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
  public:
    Reader(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}

    std::uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    std::uint32_t u32() {
        std::uint32_t v;
        copy(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        copy(&v, 8);
        return v;
    }
    double f64() {
        double v;
        copy(&v, 8);
        return v;
    }
    void copy(void* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, data_ + pos_, n);
        pos_ += n;
    }
    bool exhausted() const { return pos_ == len_; }

  private:
    void need(std::size_t n) const {
        if (pos_ + n > len_) throw ProtocolError("wire: truncated message body");
    }
    const std::uint8_t* data_;
    std::size_t len_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> frame(MessageType type, std::uint64_t request_id,
                                       const std::vector<std::uint8_t>& payload) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(payload.size()) + 13);
    w.u32(kWireVersion);
    w.u8(static_cast<std::uint8_t>(type));
    w.u64(request_id);
    w.raw(payload.data(), payload.size());
    return w.bytes();
}

inline std::vector<std::uint8_t> encode_inference_request(const InferenceRequest& req) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(req.items.size()));
    const std::uint32_t width =
        req.items.empty() ? 0 : static_cast<std::uint32_t>(req.items[0].prompt.size());
    w.u32(width);
    for (const auto& item : req.items) {
        if (item.prompt.size() != width)
            throw ProtocolError("wire: inconsistent prompt widths within one request");
        for (double v : item.prompt) w.f64(v);
        w.u32(static_cast<std::uint32_t>(item.token_ids.size()));
        for (int id : item.token_ids) w.u32(static_cast<std::uint32_t>(id));
    }
    return frame(MessageType::kInferenceRequest, req.request_id, w.bytes());
}

inline std::vector<std::uint8_t> encode_inference_response(const InferenceResponse& resp) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(resp.logits.size()));
    const std::uint32_t classes =
        resp.logits.empty() ? 0 : static_cast<std::uint32_t>(resp.logits[0].size());
    w.u32(classes);
    for (const auto& l : resp.logits)
        for (double v : l) w.f64(v);
    w.u64(resp.calls_remaining);
    return frame(MessageType::kInferenceResponse, resp.request_id, w.bytes());
}

inline std::vector<std::uint8_t> encode_status_request(std::uint64_t request_id) {
    return frame(MessageType::kStatusRequest, request_id, {});
}

inline std::vector<std::uint8_t> encode_status_response(std::uint64_t request_id,
                                                        const ServiceStatus& st) {
    Writer w;
    w.u64(st.calls_used);
    w.u64(st.budget);
    w.u64(st.checksum);
    return frame(MessageType::kStatusResponse, request_id, w.bytes());
}

inline std::vector<std::uint8_t> encode_error(std::uint64_t request_id, WireErrorCode code,
                                              const std::string& text) {
    Writer w;
    w.u32(static_cast<std::uint32_t>(code));
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.raw(text.data(), text.size());
    return frame(MessageType::kError, request_id, w.bytes());
}

struct DecodedMessage {
    MessageType type;
    std::uint64_t request_id = 0;
    InferenceRequest request;
    InferenceResponse response;
    ServiceStatus status;
    WireErrorCode error_code = WireErrorCode::kInternal;
    std::string error_text;
};

inline DecodedMessage decode_body(const std::uint8_t* data, std::size_t len) {
    Reader r(data, len);
    const auto version = r.u32();
    if (version != kWireVersion)
        throw ProtocolError("wire: unsupported version " + std::to_string(version));
    const auto raw_type = r.u8();
    DecodedMessage msg;
    msg.type = static_cast<MessageType>(raw_type);
    msg.request_id = r.u64();
    switch (msg.type) {
        case MessageType::kInferenceRequest: {
            const auto n_items = r.u32();
            const auto width = r.u32();
            msg.request.request_id = msg.request_id;
            msg.request.items.resize(n_items);
            for (auto& item : msg.request.items) {
                item.prompt.resize(width);
                for (auto& v : item.prompt) v = r.f64();
                const auto n_tokens = r.u32();
                item.token_ids.resize(n_tokens);
                for (auto& id : item.token_ids) id = static_cast<int>(r.u32());
            }
            break;
        }
        case MessageType::kInferenceResponse: {
            const auto n_items = r.u32();
            const auto classes = r.u32();
            msg.response.request_id = msg.request_id;
            msg.response.logits.assign(n_items, std::vector<double>(classes));
            for (auto& l : msg.response.logits)
                for (auto& v : l) v = r.f64();
            msg.response.calls_remaining = r.u64();
            break;
        }
        case MessageType::kStatusRequest:
            break;
        case MessageType::kStatusResponse:
            msg.status.calls_used = r.u64();
            msg.status.budget = r.u64();
            msg.status.checksum = r.u64();
            break;
        case MessageType::kError: {
            msg.error_code = static_cast<WireErrorCode>(r.u32());
            const auto text_len = r.u32();
            msg.error_text.resize(text_len);
            r.copy(msg.error_text.data(), text_len);
            break;
        }
        default:
            throw ProtocolError("wire: unknown message type " + std::to_string(raw_type));
    }
    if (!r.exhausted()) throw ProtocolError("wire: trailing bytes after message");
    return msg;
}

}  // namespace wire

// ---------------------------------------------------------------------------
// The teacher service: frozen parameters plus an atomic call meter. Both
// transports evaluate through here, so their logits are identical by
// construction.
// ---------------------------------------------------------------------------

class TeacherService {
  public:
    TeacherService(ModelParams teacher, std::uint64_t budget)
        : teacher_(std::move(teacher)), budget_(budget), checksum_(teacher_.checksum()) {
        teacher_.set_trainable(false);
    }

    InferenceResponse evaluate(const InferenceRequest& req) {
        if (req.items.empty()) throw ProtocolError("query: request carries no items");
        // grant exactly `budget_` calls, rejecting before any evaluation
        std::uint64_t used = calls_used_.load(std::memory_order_relaxed);
        do {
            if (used >= budget_)
                throw BudgetError("query: API call budget of " + std::to_string(budget_) +
                                  " exhausted");
        } while (!calls_used_.compare_exchange_weak(used, used + 1, std::memory_order_relaxed));

        InferenceResponse resp;
        resp.request_id = req.request_id;
        resp.logits.reserve(req.items.size());
        for (const auto& item : req.items) {
            ModelInput input{item.prompt, item.token_ids};
            resp.logits.push_back(forward_logits(teacher_, input));
        }
        evaluations_.fetch_add(1, std::memory_order_relaxed);
        resp.calls_remaining = budget_ - calls_used_.load(std::memory_order_relaxed);
        return resp;
    }

    ServiceStatus status() const {
        return {calls_used_.load(std::memory_order_relaxed), budget_, checksum_};
    }

    std::uint64_t checksum() const { return checksum_; }
    std::uint64_t evaluations() const { return evaluations_.load(std::memory_order_relaxed); }
    int num_classes() const { return teacher_.num_classes(); }

  private:
    ModelParams teacher_;
    std::uint64_t budget_;
    std::uint64_t checksum_;
    std::atomic<std::uint64_t> calls_used_{0};
    std::atomic<std::uint64_t> evaluations_{0};
};

// Client view of the teacher: forward logits only, metered. Both transports
// implement the same interface and are observationally identical.
class BlackBoxHandle {
  public:
    virtual ~BlackBoxHandle() = default;
    virtual InferenceResponse query(const InferenceRequest& req) = 0;
    virtual ServiceStatus status() = 0;

    // Single-instance convenience used by distillation and inference.
    std::vector<double> query_one(const std::vector<double>& prompt,
                                  const std::vector<int>& token_ids) {
        InferenceRequest req;
        req.request_id = next_request_id_++;
        req.items.push_back({prompt, token_ids});
        return query(req).logits.at(0);
    }

    std::uint64_t take_request_id() { return next_request_id_++; }

  private:
    std::atomic<std::uint64_t> next_request_id_{1};
};

class InProcessHandle : public BlackBoxHandle {
  public:
    explicit InProcessHandle(std::shared_ptr<TeacherService> service)
        : service_(std::move(service)) {}

    InferenceResponse query(const InferenceRequest& req) override {
        return service_->evaluate(req);
    }

    ServiceStatus status() override { return service_->status(); }

  private:
    std::shared_ptr<TeacherService> service_;
};

// ---------------------------------------------------------------------------
// Socket transport.
// ---------------------------------------------------------------------------

namespace detail {

inline void write_all(int fd, const std::uint8_t* data, std::size_t len) {
    while (len > 0) {
        const auto n = ::send(fd, data, len, MSG_NOSIGNAL);
        if (n <= 0) throw ServiceError("socket: send failed");
        data += n;
        len -= static_cast<std::size_t>(n);
    }
}

// Returns false on clean EOF at a frame boundary.
inline bool read_frame(int fd, std::vector<std::uint8_t>& body) {
    std::uint8_t header[4];
    std::size_t got = 0;
    while (got < 4) {
        const auto n = ::recv(fd, header + got, 4 - got, 0);
        if (n == 0 && got == 0) return false;
        if (n <= 0) throw ServiceError("socket: recv failed mid-frame");
        got += static_cast<std::size_t>(n);
    }
    std::uint32_t len;
    std::memcpy(&len, header, 4);
    if (len < 13 || len > kMaxFrameBytes)
        throw ProtocolError("wire: implausible frame length " + std::to_string(len));
    body.resize(len);
    got = 0;
    while (got < len) {
        const auto n = ::recv(fd, body.data() + got, len - got, 0);
        if (n <= 0) throw ServiceError("socket: recv failed mid-frame");
        got += static_cast<std::size_t>(n);
    }
    return true;
}

struct FdGuard {
    int fd = -1;
    FdGuard() = default;
    explicit FdGuard(int f) : fd(f) {}
    FdGuard(const FdGuard&) = delete;
    FdGuard& operator=(const FdGuard&) = delete;
    FdGuard(FdGuard&& o) noexcept : fd(o.fd) { o.fd = -1; }
    ~FdGuard() {
        if (fd >= 0) ::close(fd);
    }
};

inline std::pair<std::string, int> parse_endpoint(const std::string& endpoint) {
    const auto colon = endpoint.rfind(':');
    if (colon == std::string::npos)
        throw ConfigError("endpoint '" + endpoint + "' is not host:port");
    const std::string host = endpoint.substr(0, colon);
    const int port = std::stoi(endpoint.substr(colon + 1));
    if (port < 0 || port > 65535) throw ConfigError("endpoint port out of range");
    return {host.empty() ? "127.0.0.1" : host, port};
}

}  // namespace detail

// Serves a TeacherService over TCP: one thread per connection, frames
// answered in order per connection, concurrent across connections.
class BlackBoxServer {
  public:
    BlackBoxServer(std::shared_ptr<TeacherService> service, const std::string& endpoint)
        : service_(std::move(service)) {
        auto [host, port] = detail::parse_endpoint(endpoint);
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw ServiceError("serve: cannot create socket");
        const int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(port));
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
            ::close(listen_fd_);
            throw ServiceError("serve: bad host '" + host + "'");
        }
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            ::close(listen_fd_);
            throw ServiceError("serve: bind to " + endpoint + " failed");
        }
        if (::listen(listen_fd_, 64) != 0) {
            ::close(listen_fd_);
            throw ServiceError("serve: listen failed");
        }
        sockaddr_in bound{};
        socklen_t len = sizeof(bound);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
        port_ = ntohs(bound.sin_port);
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    ~BlackBoxServer() { stop(); }

    int port() const { return port_; }
    std::string endpoint() const { return "127.0.0.1:" + std::to_string(port_); }

    void stop() {
        bool expected = false;
        if (!stopping_.compare_exchange_strong(expected, true)) return;
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        if (accept_thread_.joinable()) accept_thread_.join();
        std::lock_guard<std::mutex> lock(workers_mutex_);
        for (auto& t : workers_)
            if (t.joinable()) t.join();
        workers_.clear();
    }

  private:
    void accept_loop() {
        while (!stopping_.load()) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) break;  // listener closed
            std::lock_guard<std::mutex> lock(workers_mutex_);
            workers_.emplace_back([this, fd] { serve_connection(fd); });
        }
    }

    void serve_connection(int fd) {
        detail::FdGuard guard(fd);
        std::vector<std::uint8_t> body;
        for (;;) {
            std::uint64_t request_id = 0;
            try {
                if (!detail::read_frame(fd, body)) return;
                auto msg = wire::decode_body(body.data(), body.size());
                request_id = msg.request_id;
                switch (msg.type) {
                    case MessageType::kInferenceRequest: {
                        auto resp = service_->evaluate(msg.request);
                        const auto out = wire::encode_inference_response(resp);
                        detail::write_all(fd, out.data(), out.size());
                        break;
                    }
                    case MessageType::kStatusRequest: {
                        const auto out =
                            wire::encode_status_response(request_id, service_->status());
                        detail::write_all(fd, out.data(), out.size());
                        break;
                    }
                    default:
                        throw ProtocolError("wire: server cannot handle message type");
                }
            } catch (const BudgetError& e) {
                if (!try_send_error(fd, request_id, WireErrorCode::kBudgetExhausted, e.what()))
                    return;
            } catch (const ProtocolError& e) {
                // framing may be lost after a malformed message: answer and drop
                try_send_error(fd, request_id, WireErrorCode::kMalformed, e.what());
                return;
            } catch (const ServiceError&) {
                return;  // connection gone
            } catch (const std::exception& e) {
                if (!try_send_error(fd, request_id, WireErrorCode::kInternal, e.what())) return;
            }
        }
    }

    bool try_send_error(int fd, std::uint64_t request_id, WireErrorCode code,
                        const std::string& text) {
        try {
            const auto out = wire::encode_error(request_id, code, text);
            detail::write_all(fd, out.data(), out.size());
            return true;
        } catch (...) {
            return false;
        }
    }

    std::shared_ptr<TeacherService> service_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread accept_thread_;
    std::mutex workers_mutex_;
    std::vector<std::thread> workers_;
};

// Starts serving `teacher` on `endpoint` ("host:port", port 0 picks a free
// one) with the given call budget. Returned server stops on destruction.
inline std::unique_ptr<BlackBoxServer> serve(ModelParams teacher, const std::string& endpoint,
                                             std::uint64_t budget) {
    auto service = std::make_shared<TeacherService>(std::move(teacher), budget);
    return std::make_unique<BlackBoxServer>(std::move(service), endpoint);
}

// Socket-backed handle. Opens a fresh connection per request; at desk scale
// connection setup is negligible and it keeps concurrent use trivial.
class SocketHandle : public BlackBoxHandle {
  public:
    explicit SocketHandle(const std::string& endpoint) {
        auto [host, port] = detail::parse_endpoint(endpoint);
        host_ = host;
        port_ = port;
        // fetch and pin the teacher checksum for this handle's lifetime
        checksum_ = status().checksum;
    }

    InferenceResponse query(const InferenceRequest& req) override {
        auto msg = round_trip(wire::encode_inference_request(req));
        if (msg.type == MessageType::kError) raise_wire_error(msg);
        if (msg.type != MessageType::kInferenceResponse)
            throw ProtocolError("wire: expected inference response");
        if (msg.request_id != req.request_id)
            throw ProtocolError("wire: response id does not echo request id");
        return msg.response;
    }

    ServiceStatus status() override {
        auto msg = round_trip(wire::encode_status_request(take_request_id()));
        if (msg.type == MessageType::kError) raise_wire_error(msg);
        if (msg.type != MessageType::kStatusResponse)
            throw ProtocolError("wire: expected status response");
        if (checksum_ != 0 && msg.status.checksum != checksum_)
            throw ServiceError("blackbox: teacher checksum changed mid-episode");
        return msg.status;
    }

    std::uint64_t checksum() const { return checksum_; }

  private:
    [[noreturn]] static void raise_wire_error(const wire::DecodedMessage& msg) {
        switch (msg.error_code) {
            case WireErrorCode::kBudgetExhausted:
                throw BudgetError(msg.error_text);
            case WireErrorCode::kMalformed:
                throw ProtocolError(msg.error_text);
            default:
                throw ServiceError(msg.error_text);
        }
    }

    wire::DecodedMessage round_trip(const std::vector<std::uint8_t>& out) {
        detail::FdGuard fd(::socket(AF_INET, SOCK_STREAM, 0));
        if (fd.fd < 0) throw ServiceError("socket: cannot create socket");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(port_));
        if (::inet_pton(AF_INET, host_.c_str(), &addr.sin_addr) != 1)
            throw ServiceError("socket: bad host '" + host_ + "'");
        if (::connect(fd.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
            throw ServiceError("socket: cannot connect to " + host_ + ":" + std::to_string(port_));
        const int one = 1;
        ::setsockopt(fd.fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        detail::write_all(fd.fd, out.data(), out.size());
        std::vector<std::uint8_t> body;
        if (!detail::read_frame(fd.fd, body)) throw ServiceError("socket: server closed connection");
        return wire::decode_body(body.data(), body.size());
    }

    std::string host_;
    int port_ = 0;
    std::uint64_t checksum_ = 0;
};

}  // namespace gdfo
