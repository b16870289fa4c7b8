#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <future>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdemu/pshell.hpp"

namespace sdemu::transport {

using isa::Word;

// Wire format: little-endian fields, no checksum.
//   WRITE32: 01 addr[4] data[4]   (no response)
//   READ32:  02 addr[4]           -> data[4]
enum class Opcode : std::uint8_t { Write32 = 0x01, Read32 = 0x02 };

inline constexpr std::size_t kWriteFrameBytes = 9;
inline constexpr std::size_t kReadFrameBytes = 5;
inline constexpr std::size_t kResponseBytes = 4;

struct Request {
  Opcode op = Opcode::Read32;
  Word addr = 0;
  Word data = 0;  // Write32 only

  friend bool operator==(const Request&, const Request&) = default;
};

inline Request write32(Word addr, Word data) { return {Opcode::Write32, addr, data}; }
inline Request read32(Word addr) { return {Opcode::Read32, addr, 0}; }

void encode(const Request& r, std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> encode(const Request& r);
std::array<std::uint8_t, kResponseBytes> encode_response(Word w);
Word decode_response(std::span<const std::uint8_t, kResponseBytes> b);

// Incremental frame decoder. Bytes that cannot start a frame are skipped;
// each contiguous skipped run counts as one framing error.
class Decoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Request> next();

  std::uint64_t framing_errors() const { return errors_; }
  std::uint64_t skipped_bytes() const { return skipped_; }
  std::size_t buffered() const { return buf_.size() - head_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t head_ = 0;
  bool in_garbage_ = false;
  std::uint64_t errors_ = 0;
  std::uint64_t skipped_ = 0;
};

// Incremental decoder for READ32 responses.
class ResponseDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Word> next();

 private:
  std::deque<std::uint8_t> buf_;
};

// The host's view of the P-Shell.
class MmioPort {
 public:
  virtual ~MmioPort() = default;
  virtual void write(Word addr, Word data) = 0;
  virtual Word read(Word addr) = 0;
};

class DirectPort final : public MmioPort {
 public:
  explicit DirectPort(pshell::PShell& shell) : shell_(shell) {}
  void write(Word addr, Word data) override { shell_.mmio_write(addr, data); }
  Word read(Word addr) override { return shell_.mmio_read(addr); }

 private:
  pshell::PShell& shell_;
};

// Loopback bridge: every request is framed, split into random chunks,
// decoded on the far side and applied to `far`; read responses take the
// same path back.
class BridgedPort final : public MmioPort {
 public:
  explicit BridgedPort(MmioPort& far, std::uint64_t seed = 1, unsigned max_chunk = 7);
  void write(Word addr, Word data) override;
  Word read(Word addr) override;

  std::uint64_t bytes_sent() const { return bytes_; }
  const Decoder& far_decoder() const { return far_dec_; }

 private:
  void send(const Request& r);

  MmioPort& far_;
  std::mt19937_64 rng_;
  unsigned max_chunk_;
  Decoder far_dec_;
  ResponseDecoder near_dec_;
  std::vector<std::uint8_t> scratch_;
  std::uint64_t bytes_ = 0;
};

// Serialized request queue between transport threads and the kernel loop.
class Mailbox {
 public:
  std::future<Word> submit(const Request& r);
  // Applies every queued request to `target` in arrival order.
  std::size_t drain(MmioPort& target);
  // Fails pending and future submissions with a broken promise.
  void close();
  bool closed() const;

 private:
  struct Item {
    Request req;
    std::promise<Word> done;
  };
  mutable std::mutex mu_;
  std::deque<Item> q_;
  bool closed_ = false;
};

// MmioPort backed by a Mailbox; reads block until the consumer drains.
class MailboxPort final : public MmioPort {
 public:
  explicit MailboxPort(Mailbox& mb) : mb_(mb) {}
  void write(Word addr, Word data) override { mb_.submit(write32(addr, data)); }
  Word read(Word addr) override { return mb_.submit(read32(addr)).get(); }

 private:
  Mailbox& mb_;
};

class ByteStream {
 public:
  virtual ~ByteStream() = default;
  // Returns bytes read; 0 means the stream is closed.
  virtual std::size_t read(std::span<std::uint8_t> buf) = 0;
  virtual void write(std::span<const std::uint8_t> buf) = 0;
};

// In-memory stream for tests: reads come from `input`, writes accumulate.
class MemoryStream final : public ByteStream {
 public:
  explicit MemoryStream(std::vector<std::uint8_t> input, std::size_t max_chunk = 0);
  std::size_t read(std::span<std::uint8_t> buf) override;
  void write(std::span<const std::uint8_t> buf) override;
  const std::vector<std::uint8_t>& written() const { return out_; }

 private:
  std::vector<std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::size_t max_chunk_;
  std::vector<std::uint8_t> out_;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// POSIX file-descriptor stream (socket or pipe). Owns the descriptor.
class FdStream final : public ByteStream {
 public:
  explicit FdStream(int fd) : fd_(fd) {}
  ~FdStream() override;
  FdStream(const FdStream&) = delete;
  FdStream& operator=(const FdStream&) = delete;
  std::size_t read(std::span<std::uint8_t> buf) override;
  void write(std::span<const std::uint8_t> buf) override;

 private:
  int fd_;
};

int tcp_listen(std::uint16_t port);  // returns a listening fd bound to 127.0.0.1
int tcp_accept(int listen_fd);
int tcp_connect(const std::string& host, std::uint16_t port);
std::uint16_t local_port(int fd);

struct PumpStats {
  std::uint64_t requests = 0;
  std::uint64_t framing_errors = 0;
};

// Decodes requests from `in`, applies them through `port`, and writes READ32
// responses to `out` in request order. Returns when `in` closes.
PumpStats bridge_pump(ByteStream& in, ByteStream& out, MmioPort& port);

// Client helper: sends one request over `s` and returns the response for reads.
std::optional<Word> transact(ByteStream& s, const Request& r);

}  // namespace sdemu::transport
