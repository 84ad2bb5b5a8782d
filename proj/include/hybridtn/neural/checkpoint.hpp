#pragma once

// Versioned binary checkpoint. All integers are little-endian.
//
//   char[8]  magic "HTNCKPT\0"
//   u32      format version (1)
//   u32      window, heads, d_model, d_ff, labels
//   i32      pad_id
//   u8       use_mask
//   f64      focal_alpha, focal_gamma
//   u32      label count, then per label: u32 byte length + UTF-8 name
//   u32      vocabulary size, then one u32 code point per id
//            (0xFFFFFFFF for the two reserved ids)
//   u32      tensor count, then per tensor:
//            u32 name length + name, u32 rows, u32 cols, rows*cols f64 row-major
//   char[4]  trailer "END\0"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "hybridtn/error.hpp"
#include "hybridtn/neural/classifier.hpp"

namespace hybridtn::neural {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

inline constexpr char kCheckpointMagic[8] = {'H', 'T', 'N', 'C', 'K', 'P', 'T', '\0'};
inline constexpr char kCheckpointTrailer[4] = {'E', 'N', 'D', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  using Error::Error;
};

namespace detail {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(const T& v) { out_.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
  void u32(std::size_t v) { pod(static_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  template <typename T>
  T pod() {
    T v;
    if (!in_.read(reinterpret_cast<char*>(&v), sizeof(T))) throw CheckpointError("truncated checkpoint");
    return v;
  }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::string str(std::size_t max_len = 1 << 20) {
    const auto n = u32();
    if (n > max_len) throw CheckpointError("implausible string length in checkpoint");
    std::string s(n, '\0');
    if (n && !in_.read(s.data(), n)) throw CheckpointError("truncated checkpoint");
    return s;
  }
  void bytes(char* p, std::size_t n) {
    if (!in_.read(p, static_cast<std::streamsize>(n))) throw CheckpointError("truncated checkpoint");
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Classifier& m) {
  detail::Writer w(out);
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const auto& c = m.config;
  w.u32(c.window);
  w.u32(c.heads);
  w.u32(c.d_model);
  w.u32(c.d_ff);
  w.u32(c.labels);
  w.pod(static_cast<std::int32_t>(c.pad_id));
  w.pod(static_cast<std::uint8_t>(c.use_mask));
  w.pod(c.focal_alpha);
  w.pod(c.focal_gamma);
  w.u32(m.label_names.size());
  for (const auto& n : m.label_names) w.str(n);
  w.u32(m.vocab.size());
  for (wchar_t ch : m.vocab.chars()) w.pod(static_cast<std::uint32_t>(ch));
  std::size_t count = 0;
  m.params.for_each([&](const std::string&, const Matrix&) { ++count; });
  w.u32(count);
  m.params.for_each([&](const std::string& name, const Matrix& t) {
    w.str(name);
    w.u32(static_cast<std::size_t>(t.rows()));
    w.u32(static_cast<std::size_t>(t.cols()));
    w.bytes(reinterpret_cast<const char*>(t.data()), sizeof(double) * static_cast<std::size_t>(t.size()));
  });
  w.bytes(kCheckpointTrailer, sizeof kCheckpointTrailer);
  if (!out) throw CheckpointError("failed writing checkpoint");
}

inline Classifier read_checkpoint(std::istream& in) {
  detail::Reader r(in);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw CheckpointError("not a checkpoint file");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Classifier m;
  auto& c = m.config;
  c.window = r.u32();
  c.heads = r.u32();
  c.d_model = r.u32();
  c.d_ff = r.u32();
  c.labels = r.u32();
  c.pad_id = r.pod<std::int32_t>();
  c.use_mask = r.pod<std::uint8_t>() != 0;
  c.focal_alpha = r.pod<double>();
  c.focal_gamma = r.pod<double>();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("invalid stored config: ") + e.what());
  }
  const auto n_labels = r.u32();
  if (n_labels != c.labels) throw CheckpointError("label table does not match stored label count");
  for (std::uint32_t i = 0; i < n_labels; ++i) m.label_names.push_back(r.str());
  const auto n_vocab = r.u32();
  if (n_vocab < 2 || n_vocab > (1u << 22)) throw CheckpointError("implausible vocabulary size");
  std::vector<wchar_t> chars(n_vocab);
  for (auto& ch : chars) ch = static_cast<wchar_t>(r.u32());
  try {
    m.vocab = Vocabulary::from_chars(chars, c.pad_id);
  } catch (const Error& e) {
    throw CheckpointError(std::string("bad vocabulary: ") + e.what());
  }
  const auto n_tensors = r.u32();
  m.params.query.resize(c.heads);
  m.params.key.resize(c.heads);
  m.params.value.resize(c.heads);
  std::size_t expected = 0;
  m.params.for_each([&](const std::string&, Matrix&) { ++expected; });
  if (n_tensors != expected) throw CheckpointError("unexpected tensor count");
  m.params.for_each([&](const std::string& name, Matrix& t) {
    const auto stored = r.str(256);
    if (stored != name) throw CheckpointError("expected tensor '" + name + "', found '" + stored + "'");
    const auto rows = r.u32();
    const auto cols = r.u32();
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) throw CheckpointError("implausible tensor size");
    t.resize(rows, cols);
    r.bytes(reinterpret_cast<char*>(t.data()), sizeof(double) * static_cast<std::size_t>(t.size()));
  });
  char trailer[4];
  r.bytes(trailer, sizeof trailer);
  if (std::memcmp(trailer, kCheckpointTrailer, sizeof trailer) != 0 || !r.at_end()) {
    throw CheckpointError("corrupt checkpoint trailer");
  }
  try {
    m.params.check_shapes(c, m.vocab.size());
  } catch (const ValidationError& e) {
    throw CheckpointError(e.what());
  }
  if (!m.params.all_finite()) throw CheckpointError("checkpoint contains non-finite values");
  return m;
}

inline void save_params(const std::string& path, const Classifier& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_checkpoint(out, m);
}

inline Classifier load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_checkpoint(in);
}

// Loads and rejects checkpoints whose shapes disagree with `expected`.
inline Classifier load_params(const std::string& path, const ClassifierConfig& expected) {
  Classifier m = load_params(path);
  const auto& c = m.config;
  const auto mismatch = [](const char* what, std::size_t got, std::size_t want) {
    return CheckpointError(std::string(what) + " mismatch: checkpoint has " + std::to_string(got) +
                           ", expected " + std::to_string(want));
  };
  if (c.window != expected.window) throw mismatch("window", c.window, expected.window);
  if (c.heads != expected.heads) throw mismatch("heads", c.heads, expected.heads);
  if (c.d_model != expected.d_model) throw mismatch("d_model", c.d_model, expected.d_model);
  if (c.d_ff != expected.d_ff) throw mismatch("d_ff", c.d_ff, expected.d_ff);
  if (c.labels != expected.labels) throw mismatch("label count", c.labels, expected.labels);
  return m;
}

}  // namespace hybridtn::neural
