#pragma once

// Binary checkpoint layout (all integers and reals little-endian):
//
//   magic      8 bytes  "HUAPACKP"
//   version    u32      1
//   variant    u32
//   dims       6 x u64  word, user, product, hidden, attention, classes
//   vocab      3 x u64  row counts: words, users, products
//   hashes     3 x u64  vocabulary hashes: words, users, products
//   count      u64      number of parameter records
//   records    count x { u32 name length, name bytes, u8 trainable,
//                        u64 rows, u64 cols, rows*cols x f64 }
//
// Loading rebuilds the architecture from the header and requires every
// record to match the expected parameter name and shape.

#include "huapa/data.hpp"
#include "huapa/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>

namespace huapa {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::unique_ptr<HuapaModel> model;
    VocabularyHashes hashes;
};

void save_checkpoint(std::ostream& out, const HuapaModel& model, const VocabularyHashes& hashes);
void save_checkpoint(const std::filesystem::path& path, const HuapaModel& model, const VocabularyHashes& hashes);

Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Loads and refuses a checkpoint trained against a different vocabulary.
Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace huapa
