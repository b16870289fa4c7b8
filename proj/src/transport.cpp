#include "sdemu/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace sdemu::transport {

namespace {

void put_le(std::vector<std::uint8_t>& out, Word w) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
}

Word get_le(const std::uint8_t* p) {
  return Word{p[0]} | Word{p[1]} << 8 | Word{p[2]} << 16 | Word{p[3]} << 24;
}

}  // namespace

void encode(const Request& r, std::vector<std::uint8_t>& out) {
  out.push_back(static_cast<std::uint8_t>(r.op));
  put_le(out, r.addr);
  if (r.op == Opcode::Write32) put_le(out, r.data);
}

std::vector<std::uint8_t> encode(const Request& r) {
  std::vector<std::uint8_t> out;
  encode(r, out);
  return out;
}

std::array<std::uint8_t, kResponseBytes> encode_response(Word w) {
  return {static_cast<std::uint8_t>(w), static_cast<std::uint8_t>(w >> 8), static_cast<std::uint8_t>(w >> 16),
          static_cast<std::uint8_t>(w >> 24)};
}

Word decode_response(std::span<const std::uint8_t, kResponseBytes> b) { return get_le(b.data()); }

void Decoder::feed(std::span<const std::uint8_t> bytes) {
  if (head_ > 4096 && head_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(head_));
    head_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Request> Decoder::next() {
  while (head_ < buf_.size()) {
    const std::uint8_t op = buf_[head_];
    if (op != static_cast<std::uint8_t>(Opcode::Write32) && op != static_cast<std::uint8_t>(Opcode::Read32)) {
      if (!in_garbage_) ++errors_;
      in_garbage_ = true;
      ++skipped_;
      ++head_;
      continue;
    }
    const std::size_t need = op == static_cast<std::uint8_t>(Opcode::Write32) ? kWriteFrameBytes : kReadFrameBytes;
    if (buf_.size() - head_ < need) return std::nullopt;
    in_garbage_ = false;
    Request r;
    r.op = static_cast<Opcode>(op);
    r.addr = get_le(&buf_[head_ + 1]);
    if (r.op == Opcode::Write32) r.data = get_le(&buf_[head_ + 5]);
    head_ += need;
    return r;
  }
  return std::nullopt;
}

void ResponseDecoder::feed(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

std::optional<Word> ResponseDecoder::next() {
  if (buf_.size() < kResponseBytes) return std::nullopt;
  std::uint8_t b[kResponseBytes];
  for (auto& x : b) {
    x = buf_.front();
    buf_.pop_front();
  }
  return get_le(b);
}

BridgedPort::BridgedPort(MmioPort& far, std::uint64_t seed, unsigned max_chunk)
    : far_(far), rng_(seed), max_chunk_(std::max(1u, max_chunk)) {}

void BridgedPort::send(const Request& r) {
  scratch_.clear();
  encode(r, scratch_);
  bytes_ += scratch_.size();
  std::uniform_int_distribution<unsigned> chunk(1, max_chunk_);
  std::size_t pos = 0;
  while (pos < scratch_.size()) {
    const std::size_t n = std::min<std::size_t>(chunk(rng_), scratch_.size() - pos);
    far_dec_.feed(std::span(scratch_).subspan(pos, n));
    pos += n;
    while (auto req = far_dec_.next()) {
      if (req->op == Opcode::Write32) {
        far_.write(req->addr, req->data);
      } else {
        auto resp = encode_response(far_.read(req->addr));
        near_dec_.feed(resp);
      }
    }
  }
}

void BridgedPort::write(Word addr, Word data) { send(write32(addr, data)); }

Word BridgedPort::read(Word addr) {
  send(read32(addr));
  auto w = near_dec_.next();
  if (!w) throw TransportError("bridge lost a read response");
  return *w;
}

std::future<Word> Mailbox::submit(const Request& r) {
  std::lock_guard lk(mu_);
  Item it{r, {}};
  auto f = it.done.get_future();
  if (closed_) return f;  // promise dropped: broken_promise on get()
  q_.push_back(std::move(it));
  return f;
}

std::size_t Mailbox::drain(MmioPort& target) {
  std::deque<Item> batch;
  {
    std::lock_guard lk(mu_);
    batch.swap(q_);
  }
  for (auto& it : batch) {
    if (it.req.op == Opcode::Write32) {
      target.write(it.req.addr, it.req.data);
      it.done.set_value(0);
    } else {
      it.done.set_value(target.read(it.req.addr));
    }
  }
  return batch.size();
}

void Mailbox::close() {
  std::lock_guard lk(mu_);
  closed_ = true;
  q_.clear();
}

bool Mailbox::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

MemoryStream::MemoryStream(std::vector<std::uint8_t> input, std::size_t max_chunk)
    : in_(std::move(input)), max_chunk_(max_chunk) {}

std::size_t MemoryStream::read(std::span<std::uint8_t> buf) {
  std::size_t n = std::min(buf.size(), in_.size() - pos_);
  if (max_chunk_) n = std::min(n, max_chunk_);
  std::copy_n(in_.begin() + static_cast<std::ptrdiff_t>(pos_), n, buf.begin());
  pos_ += n;
  return n;
}

void MemoryStream::write(std::span<const std::uint8_t> buf) { out_.insert(out_.end(), buf.begin(), buf.end()); }

FdStream::~FdStream() {
  if (fd_ >= 0) ::close(fd_);
}

std::size_t FdStream::read(std::span<std::uint8_t> buf) {
  for (;;) {
    const ssize_t n = ::read(fd_, buf.data(), buf.size());
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == ECONNRESET) return 0;
    throw TransportError(std::string("read: ") + std::strerror(errno));
  }
}

void FdStream::write(std::span<const std::uint8_t> buf) {
  std::size_t done = 0;
  while (done < buf.size()) {
    const ssize_t n = ::send(fd_, buf.data() + done, buf.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(std::string("write: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

int tcp_listen(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(port);
  a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) < 0 || ::listen(fd, 1) < 0) {
    const int e = errno;
    ::close(fd);
    throw TransportError(std::string("listen: ") + std::strerror(e));
  }
  return fd;
}

int tcp_accept(int listen_fd) {
  for (;;) {
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd >= 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return fd;
    }
    if (errno != EINTR) throw TransportError(std::string("accept: ") + std::strerror(errno));
  }
}

int tcp_connect(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string svc = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), svc.c_str(), &hints, &res); rc != 0)
    throw TransportError("resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (auto* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("connect " + host + ":" + svc + " failed");
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

std::uint16_t local_port(int fd) {
  sockaddr_in a{};
  socklen_t len = sizeof a;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
  return ntohs(a.sin_port);
}

PumpStats bridge_pump(ByteStream& in, ByteStream& out, MmioPort& port) {
  PumpStats st;
  Decoder dec;
  std::array<std::uint8_t, 512> buf;
  for (;;) {
    const std::size_t n = in.read(buf);
    if (n == 0) break;
    dec.feed(std::span(buf.data(), n));
    while (auto r = dec.next()) {
      ++st.requests;
      if (r->op == Opcode::Write32) {
        port.write(r->addr, r->data);
      } else {
        auto resp = encode_response(port.read(r->addr));
        out.write(resp);
      }
    }
  }
  st.framing_errors = dec.framing_errors();
  return st;
}

std::optional<Word> transact(ByteStream& s, const Request& r) {
  auto bytes = encode(r);
  s.write(bytes);
  if (r.op == Opcode::Write32) return std::nullopt;
  std::array<std::uint8_t, kResponseBytes> b;
  std::size_t got = 0;
  while (got < b.size()) {
    const std::size_t n = s.read(std::span(b).subspan(got));
    if (n == 0) throw TransportError("connection closed before response");
    got += n;
  }
  return decode_response(b);
}

}  // namespace sdemu::transport
