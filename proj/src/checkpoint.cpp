#include "fkmad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fkmad/errors.hpp"

namespace fkmad {

namespace {

constexpr char kMagic[8] = {'F', 'K', 'M', 'A', 'D', 'C', 'K', 'P'};

template <typename U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& source) : b_(bytes), src_(source) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == b_.size(); }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError("checkpoint " + src_ + ": " + msg + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) fail(std::string("truncated while reading ") + what);
  }

  const std::string& b_;
  std::string src_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, ck.version);
  put<std::uint64_t>(out, ck.step);
  put<std::uint64_t>(out, ck.config.size());
  out += ck.config;
  put<std::uint64_t>(out, ck.tensors.size());
  for (const auto& [name, t] : ck.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& source) {
  Reader r(bytes, source);
  if (r.bytes(sizeof kMagic, "magic") != std::string(kMagic, sizeof kMagic)) r.fail("not a checkpoint file");
  Checkpoint ck;
  ck.version = r.get<std::uint32_t>("version");
  if (ck.version != kCheckpointVersion) {
    r.fail("unsupported format version " + std::to_string(ck.version));
  }
  ck.step = r.get<std::uint64_t>("step");
  ck.config = r.bytes(r.get<std::uint64_t>("config length"), "config");
  const auto count = r.get<std::uint64_t>("tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.get<std::uint32_t>("name length"), "tensor name");
    const auto rank = r.get<std::uint32_t>("rank");
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = r.get<std::uint64_t>("extent");
      n *= d;
    }
    if (n > bytes.size() / 8) r.fail("tensor '" + name + "' larger than the file");
    std::vector<double> data(n);
    for (double& v : data) v = std::bit_cast<double>(r.get<std::uint64_t>("tensor values"));
    if (!ck.tensors.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
      r.fail("duplicate tensor '" + name + "'");
    }
  }
  if (!r.done()) r.fail("trailing bytes");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("checkpoint: cannot write '" + path + "'");
  const std::string bytes = serialize_checkpoint(ck);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("checkpoint: cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str(), path);
}

}  // namespace fkmad
