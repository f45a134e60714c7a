#pragma once

#include <filesystem>
#include <string>

#include "semcomp/types.hpp"

namespace semcomp {

// SCM1 container, little-endian:
//   [0,4)   magic "SCM1"
//   [4]     dtype (1 = f64, 2 = packed bits, LSB-first, each row padded to a byte)
//   [5,8)   reserved, zero
//   [8,16)  n_rows u64
//   [16,24) n_cols u64
//   payload, row-major
inline constexpr std::size_t kScmHeaderSize = 24;

enum class ScmDtype : std::uint8_t { f64 = 1, bits = 2 };

std::string serialize_matrix(const RepresentationMatrix& m);
std::string serialize_bits(const BinaryFeatureMatrix& b);

/// The stage is not persisted; callers state what they expect to read.
RepresentationMatrix deserialize_matrix(std::string_view bytes, Stage stage = Stage::raw);
BinaryFeatureMatrix deserialize_bits(std::string_view bytes);

void write_matrix(const RepresentationMatrix& m, const std::filesystem::path& path);
RepresentationMatrix read_matrix(const std::filesystem::path& path, Stage stage = Stage::raw);

void write_bits(const BinaryFeatureMatrix& b, const std::filesystem::path& path);
BinaryFeatureMatrix read_bits(const std::filesystem::path& path);

/// "word<TAB>count" per line, LF endings.
std::string format_vocab(const Vocabulary& vocab);
Vocabulary parse_vocab(std::string_view text);
void write_vocab(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary read_vocab(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace semcomp
