#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace huapa {

using TokenId = std::int32_t;

struct ReviewDoc {
    std::string user;
    std::string product;
    std::size_t label = 0;  // 0-based class
    std::vector<std::vector<std::string>> sentences;

    bool operator==(const ReviewDoc&) const = default;
};

// On-disk corpus layout: user, product, rating (1..classes), text.
struct CorpusFormat {
    std::string field_separator = "\t\t";
    std::string sentence_delimiter = "<sssss>";
    std::size_t num_classes = 5;
    bool lowercase = true;
};

ReviewDoc parse_line(std::string_view line, std::size_t line_no, const CorpusFormat& format);

// Streams one document at a time to `sink`; returns the number of documents.
std::size_t for_each_document(std::istream& in, const CorpusFormat& format,
                              const std::function<void(ReviewDoc&&)>& sink);
std::size_t for_each_document(const std::filesystem::path& path, const CorpusFormat& format,
                              const std::function<void(ReviewDoc&&)>& sink);

std::vector<ReviewDoc> parse_corpus(std::istream& in, const CorpusFormat& format);
std::vector<ReviewDoc> parse_corpus(const std::filesystem::path& path, const CorpusFormat& format);

void write_corpus(std::ostream& out, std::span<const ReviewDoc> docs, const CorpusFormat& format);
void write_corpus(const std::filesystem::path& path, std::span<const ReviewDoc> docs, const CorpusFormat& format);

// Dense token <-> id map. Reserved tokens occupy the first ids.
class Dictionary {
public:
    Dictionary() = default;
    explicit Dictionary(std::vector<std::string> reserved);

    TokenId add(const std::string& token);
    std::optional<TokenId> find(std::string_view token) const;
    TokenId lookup(std::string_view token, TokenId fallback) const;
    const std::string& token(TokenId id) const { return m_tokens.at(static_cast<std::size_t>(id)); }

    std::size_t size() const noexcept { return m_tokens.size(); }
    std::size_t reserved() const noexcept { return m_reserved; }
    const std::vector<std::string>& tokens() const noexcept { return m_tokens; }

    // FNV-1a over the ordered (token, id) listing.
    std::uint64_t hash() const;

    bool operator==(const Dictionary& other) const { return m_tokens == other.m_tokens; }

private:
    std::vector<std::string> m_tokens;
    std::unordered_map<std::string, TokenId> m_ids;
    std::size_t m_reserved = 0;
};

struct VocabularyHashes {
    std::uint64_t words = 0;
    std::uint64_t users = 0;
    std::uint64_t products = 0;

    bool operator==(const VocabularyHashes&) const = default;
};

struct Vocabulary {
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kUnkUser = 0;
    static constexpr TokenId kUnkProduct = 0;

    Dictionary words{{"<pad>", "<unk>"}};
    Dictionary users{{"<unk>"}};
    Dictionary products{{"<unk>"}};
    // Training-split frequency per word id; the UNK slot counts the
    // occurrences of every word that fell below the cutoff.
    std::vector<std::uint64_t> word_frequency;
    std::size_t min_frequency = 1;

    VocabularyHashes hashes() const;

    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(std::istream& in);
    static Vocabulary load(const std::filesystem::path& path);
};

// Accumulates token counts one document at a time.
class VocabularyBuilder {
public:
    void add(const ReviewDoc& doc);
    std::size_t documents() const noexcept { return m_documents; }
    Vocabulary finish(std::size_t min_frequency) const;

private:
    std::unordered_map<std::string, std::uint64_t> m_word_counts;
    std::map<std::string, std::uint64_t> m_users;
    std::map<std::string, std::uint64_t> m_products;
    std::size_t m_documents = 0;
};

Vocabulary build_vocab(std::span<const ReviewDoc> train_docs, std::size_t min_frequency = 2);

struct EncodeLimits {
    std::size_t max_sentences = 40;
    std::size_t max_words = 50;
};

struct EncodeStats {
    std::size_t documents = 0;
    std::size_t truncated_documents = 0;  // lost trailing sentences
    std::size_t truncated_sentences = 0;  // lost trailing words
    std::size_t tokens = 0;
    std::size_t unk_tokens = 0;
    std::size_t unk_users = 0;
    std::size_t unk_products = 0;

    double unk_rate() const { return tokens == 0 ? 0.0 : static_cast<double>(unk_tokens) / static_cast<double>(tokens); }
};

// Truncated, id-mapped document in ragged form.
struct EncodedDoc {
    TokenId user = Vocabulary::kUnkUser;
    TokenId product = Vocabulary::kUnkProduct;
    std::size_t label = 0;
    std::vector<std::vector<TokenId>> sentences;

    std::size_t max_sentence_length() const;
};

EncodedDoc encode_document(const ReviewDoc& doc, const Vocabulary& vocab, const EncodeLimits& limits = {},
                           EncodeStats* stats = nullptr);
std::vector<EncodedDoc> encode(std::span<const ReviewDoc> docs, const Vocabulary& vocab,
                               const EncodeLimits& limits = {}, EncodeStats* stats = nullptr);
std::vector<EncodedDoc> encode_file(const std::filesystem::path& path, const CorpusFormat& format,
                                    const Vocabulary& vocab, const EncodeLimits& limits = {},
                                    EncodeStats* stats = nullptr);

// Padded [rows x cols] view of one document. Masks are true exactly where a
// real sentence / token sits; real entries always form a prefix.
struct DocGrid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<TokenId> ids;  // row-major, PAD where masked
    std::vector<std::vector<bool>> word_mask;
    std::vector<bool> sentence_mask;
    TokenId user = Vocabulary::kUnkUser;
    TokenId product = Vocabulary::kUnkProduct;
    std::size_t label = 0;

    TokenId id(std::size_t row, std::size_t col) const { return ids[row * cols + col]; }
    std::size_t sentence_count() const;
    std::size_t sentence_length(std::size_t row) const;
};

// rows/cols of 0 size the grid tightly around the document.
DocGrid make_grid(const EncodedDoc& doc, std::size_t rows = 0, std::size_t cols = 0);

struct EmbeddingTable {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> values;
    std::size_t loaded_rows = 0;
    std::size_t random_rows = 0;  // excludes PAD
};

// Word rows drawn from U(-range, range), PAD row zero.
EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed, double range = 0.01);

// Text format: optional "count dim" header, then "token v1 ... vdim" lines.
// Rows not present in the file stay random; tokens not in the vocabulary
// are skipped.
EmbeddingTable load_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim, std::uint64_t seed,
                               double range = 0.01);
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim,
                               std::uint64_t seed, double range = 0.01);

struct SyntheticConfig {
    std::uint64_t seed = 1;
    std::size_t users = 20;
    std::size_t products = 20;
    std::size_t documents = 1000;
    std::size_t classes = 5;
    double dev_fraction = 0.1;
    double test_fraction = 0.1;
    // Every user bias and product quality forced to 0.
    bool neutral = false;
};

struct SyntheticDocInfo {
    std::size_t base = 0;
    int user_bias = 0;
    int product_quality = 0;
};

// Corpus where label = clamp(base + user_bias + product_quality, 0, C-1).
// Each review has 1-2 sentences carrying words from the pool of its base
// level, one sentence holding all three user-marker tokens and one holding
// all three product-marker tokens, in random order. Which marker matters
// is a property of the reviewer / product, so it can only be read off the
// text when the encoder knows who wrote the review and about what.
struct SyntheticCorpus {
    std::vector<ReviewDoc> train, dev, test;
    std::vector<SyntheticDocInfo> train_info, dev_info, test_info;
    std::map<std::string, int> user_bias;
    std::map<std::string, int> product_quality;
};

SyntheticCorpus gen_synthetic(const SyntheticConfig& config);

namespace synthetic {

std::string sentiment_token(std::size_t level, std::size_t k);
// Returns the level when `token` belongs to a sentiment pool.
std::optional<std::size_t> sentiment_level(std::string_view token);
std::string user_marker(int bias);
std::string product_marker(int quality);

}  // namespace synthetic

}  // namespace huapa
