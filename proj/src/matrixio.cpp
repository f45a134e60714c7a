#include "semcomp/matrixio.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace semcomp {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::raw: return "raw";
    case Stage::centered: return "centered";
    case Stage::whitened: return "whitened";
    case Stage::components: return "components";
    case Stage::normalized: return "normalized";
  }
  return "raw";
}

BinaryFeatureMatrix::BinaryFeatureMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), blocks_((cols + 63) / 64), bits_(rows * blocks_, 0) {}

void BinaryFeatureMatrix::set(std::size_t row, std::size_t col, bool value) {
  auto& block = bits_[row * blocks_ + col / 64];
  const std::uint64_t mask = std::uint64_t{1} << (col % 64);
  block = value ? (block | mask) : (block & ~mask);
}

std::size_t BinaryFeatureMatrix::count() const {
  std::size_t n = 0;
  for (auto block : bits_) n += static_cast<std::size_t>(std::popcount(block));
  return n;
}

std::size_t BinaryFeatureMatrix::row_count(std::size_t row) const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < blocks_; ++k) n += static_cast<std::size_t>(std::popcount(row_blocks(row)[k]));
  return n;
}

std::size_t BinaryFeatureMatrix::column_count(std::size_t col) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < rows_; ++i) n += get(i, col) ? 1 : 0;
  return n;
}

std::vector<std::vector<std::uint64_t>> BinaryFeatureMatrix::column_sets() const {
  const std::size_t row_blocks_n = (rows_ + 63) / 64;
  std::vector<std::vector<std::uint64_t>> sets(cols_, std::vector<std::uint64_t>(row_blocks_n, 0));
  for (std::size_t i = 0; i < rows_; ++i) {
    const std::uint64_t* row = row_blocks(i);
    for (std::size_t k = 0; k < blocks_; ++k) {
      std::uint64_t block = row[k];
      while (block) {
        const int bit = std::countr_zero(block);
        sets[k * 64 + static_cast<std::size_t>(bit)][i / 64] |= std::uint64_t{1} << (i % 64);
        block &= block - 1;
      }
    }
  }
  return sets;
}

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::uint64_t> counts) {
  if (words.size() != counts.size()) throw Error("vocabulary: words and counts differ in length");
  words_.reserve(words.size());
  counts_.reserve(counts.size());
  for (std::size_t i = 0; i < words.size(); ++i) add(std::move(words[i]), counts[i]);
}

void Vocabulary::add(std::string word, std::uint64_t count) {
  auto [it, inserted] = index_.emplace(word, words_.size());
  if (!inserted) throw Error("duplicate word: " + word);
  words_.push_back(std::move(word));
  counts_.push_back(count);
}

std::ptrdiff_t Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

namespace {

constexpr char kMagic[4] = {'S', 'C', 'M', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::string header(ScmDtype dtype, std::uint64_t rows, std::uint64_t cols) {
  std::string out(kMagic, 4);
  out.push_back(static_cast<char>(dtype));
  out.append(3, '\0');
  put_u64(out, rows);
  put_u64(out, cols);
  return out;
}

struct Header {
  ScmDtype dtype;
  std::uint64_t rows;
  std::uint64_t cols;
};

Header parse_header(std::string_view bytes) {
  if (bytes.size() < kScmHeaderSize) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("bad magic");
    throw Error("truncated header");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("bad magic");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (p[4] != 1 && p[4] != 2) throw Error("unknown dtype " + std::to_string(p[4]));
  if (p[5] != 0 || p[6] != 0 || p[7] != 0) throw Error("reserved header bytes are not zero");
  return {static_cast<ScmDtype>(p[4]), get_u64(p + 8), get_u64(p + 16)};
}

// Payload byte count, or throws when rows*cols cannot be represented.
std::uint64_t payload_size(const Header& h) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  if (h.dtype == ScmDtype::f64) {
    if (h.cols != 0 && h.rows > kMax / h.cols) throw Error("dimension overflow");
    const std::uint64_t cells = h.rows * h.cols;
    if (cells > kMax / 8) throw Error("dimension overflow");
    return cells * 8;
  }
  const std::uint64_t row_bytes = h.cols / 8 + (h.cols % 8 ? 1 : 0);
  if (row_bytes != 0 && h.rows > kMax / row_bytes) throw Error("dimension overflow");
  return h.rows * row_bytes;
}

void check_payload(const Header& h, std::string_view bytes) {
  const std::uint64_t need = payload_size(h);
  const std::uint64_t have = bytes.size() - kScmHeaderSize;
  if (have < need) throw Error("truncated payload: expected " + std::to_string(need) + " bytes, found " + std::to_string(have));
  if (have > need) throw Error("trailing bytes after payload");
  if (need > std::numeric_limits<std::size_t>::max()) throw Error("dimension overflow");
}

}  // namespace

std::string serialize_matrix(const RepresentationMatrix& m) {
  if (!m.all_finite()) throw Error("matrix contains non-finite values");
  std::string out = header(ScmDtype::f64, m.rows(), m.cols());
  out.reserve(kScmHeaderSize + m.rows() * m.cols() * 8);
  const double* data = m.values.data();
  for (Eigen::Index i = 0; i < m.values.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
  return out;
}

RepresentationMatrix deserialize_matrix(std::string_view bytes, Stage stage) {
  const Header h = parse_header(bytes);
  if (h.dtype != ScmDtype::f64) throw Error("expected an f64 matrix, found packed bits");
  check_payload(h, bytes);
  RowMatrix values(static_cast<Eigen::Index>(h.rows), static_cast<Eigen::Index>(h.cols));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + kScmHeaderSize;
  double* out = values.data();
  for (Eigen::Index i = 0; i < values.size(); ++i, p += 8) out[i] = std::bit_cast<double>(get_u64(p));
  if (!values.allFinite()) throw Error("matrix contains non-finite values");
  return {std::move(values), stage};
}

std::string serialize_bits(const BinaryFeatureMatrix& b) {
  std::string out = header(ScmDtype::bits, b.rows(), b.cols());
  const std::size_t row_bytes = (b.cols() + 7) / 8;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    const std::uint64_t* row = b.row_blocks(i);
    for (std::size_t j = 0; j < row_bytes; ++j) {
      out.push_back(static_cast<char>((row[j / 8] >> (8 * (j % 8))) & 0xffu));
    }
  }
  return out;
}

BinaryFeatureMatrix deserialize_bits(std::string_view bytes) {
  const Header h = parse_header(bytes);
  if (h.dtype != ScmDtype::bits) throw Error("expected packed bits, found an f64 matrix");
  check_payload(h, bytes);
  BinaryFeatureMatrix b(h.rows, h.cols);
  const std::size_t row_bytes = (h.cols + 7) / 8;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + kScmHeaderSize;
  for (std::size_t i = 0; i < h.rows; ++i) {
    for (std::size_t j = 0; j < row_bytes; ++j) {
      const unsigned char byte = p[i * row_bytes + j];
      for (std::size_t bit = 0; bit < 8; ++bit) {
        if (!((byte >> bit) & 1u)) continue;
        const std::size_t col = j * 8 + bit;
        if (col >= h.cols) throw Error("nonzero padding bits in row " + std::to_string(i));
        b.set(i, col, true);
      }
    }
  }
  return b;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error("read failed: " + path.string());
  return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + ": " + ec.message());
}

void write_matrix(const RepresentationMatrix& m, const std::filesystem::path& path) {
  write_file(path, serialize_matrix(m));
}

RepresentationMatrix read_matrix(const std::filesystem::path& path, Stage stage) {
  try {
    return deserialize_matrix(read_file(path), stage);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_bits(const BinaryFeatureMatrix& b, const std::filesystem::path& path) {
  write_file(path, serialize_bits(b));
}

BinaryFeatureMatrix read_bits(const std::filesystem::path& path) {
  try {
    return deserialize_bits(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string format_vocab(const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& w = vocab.word(i);
    if (w.empty() || w.find_first_of("\t\n\r") != std::string::npos) {
      throw Error("word at row " + std::to_string(i) + " cannot be stored in a vocabulary file");
    }
    out += w;
    out += '\t';
    out += std::to_string(vocab.count(i));
    out += '\n';
  }
  return out;
}

Vocabulary parse_vocab(std::string_view text) {
  Vocabulary vocab;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    const auto tab = line.rfind('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw Error("malformed vocabulary line " + std::to_string(line_no));
    }
    const std::string_view count_text = line.substr(tab + 1);
    std::uint64_t count = 0;
    auto [ptr, ec] = std::from_chars(count_text.data(), count_text.data() + count_text.size(), count);
    if (ec != std::errc{} || ptr != count_text.data() + count_text.size() || count_text.empty()) {
      throw Error("malformed count on vocabulary line " + std::to_string(line_no));
    }
    vocab.add(std::string(line.substr(0, tab)), count);
  }
  return vocab;
}

void write_vocab(const Vocabulary& vocab, const std::filesystem::path& path) {
  write_file(path, format_vocab(vocab));
}

Vocabulary read_vocab(const std::filesystem::path& path) {
  try {
    return parse_vocab(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace semcomp
