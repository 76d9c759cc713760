#include "huapa/data.hpp"

#include "huapa/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace huapa {

namespace {

std::string escape(std::string_view s)
{
    std::string out;
    for (char c : s) {
        if (c == '\t') out += "\\t";
        else out += c;
    }
    return out;
}

[[noreturn]] void data_error(std::size_t line_no, const std::string& what)
{
    fail(ErrorKind::data, "line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string_view> split_on(std::string_view s, std::string_view sep)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + sep.size();
    }
}

std::vector<std::string> split_whitespace(std::string_view s)
{
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        const std::size_t start = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i > start) words.emplace_back(s.substr(start, i - start));
    }
    return words;
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::ifstream open_input(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::data, "cannot open " + path.string());
    return in;
}

constexpr std::string_view kVocabMagic = "# huapa-vocabulary v1";

}  // namespace

// ---- corpus ----------------------------------------------------------------

ReviewDoc parse_line(std::string_view line, std::size_t line_no, const CorpusFormat& format)
{
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto fields = split_on(line, format.field_separator);
    if (fields.size() != 4) {
        data_error(line_no, "expected 4 fields separated by '" + escape(format.field_separator) + "', found " +
                                std::to_string(fields.size()));
    }

    ReviewDoc doc;
    doc.user = std::string(trim(fields[0]));
    doc.product = std::string(trim(fields[1]));
    if (doc.user.empty() || doc.product.empty()) data_error(line_no, "empty user or product field");

    const std::string_view rating = trim(fields[2]);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(rating.data(), rating.data() + rating.size(), value);
    if (ec != std::errc() || ptr != rating.data() + rating.size())
        data_error(line_no, "label '" + std::string(rating) + "' is not an integer");
    if (value < 1 || value > static_cast<long long>(format.num_classes)) {
        data_error(line_no, "label " + std::to_string(value) + " outside 1.." + std::to_string(format.num_classes));
    }
    doc.label = static_cast<std::size_t>(value - 1);

    std::string text(fields[3]);
    if (format.lowercase)
        for (char& c : text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (std::string_view piece : split_on(text, format.sentence_delimiter)) {
        auto words = split_whitespace(piece);
        if (!words.empty()) doc.sentences.push_back(std::move(words));
    }
    if (doc.sentences.empty()) data_error(line_no, "empty text field");
    return doc;
}

std::size_t for_each_document(std::istream& in, const CorpusFormat& format,
                              const std::function<void(ReviewDoc&&)>& sink)
{
    std::string line;
    std::size_t line_no = 0;
    std::size_t count = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        sink(parse_line(line, line_no, format));
        ++count;
    }
    return count;
}

std::size_t for_each_document(const std::filesystem::path& path, const CorpusFormat& format,
                              const std::function<void(ReviewDoc&&)>& sink)
{
    auto in = open_input(path);
    try {
        return for_each_document(in, format, sink);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

std::vector<ReviewDoc> parse_corpus(std::istream& in, const CorpusFormat& format)
{
    std::vector<ReviewDoc> docs;
    for_each_document(in, format, [&](ReviewDoc&& doc) { docs.push_back(std::move(doc)); });
    return docs;
}

std::vector<ReviewDoc> parse_corpus(const std::filesystem::path& path, const CorpusFormat& format)
{
    std::vector<ReviewDoc> docs;
    for_each_document(path, format, [&](ReviewDoc&& doc) { docs.push_back(std::move(doc)); });
    return docs;
}

void write_corpus(std::ostream& out, std::span<const ReviewDoc> docs, const CorpusFormat& format)
{
    for (const ReviewDoc& doc : docs) {
        out << doc.user << format.field_separator << doc.product << format.field_separator << (doc.label + 1)
            << format.field_separator;
        for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
            if (s > 0) out << ' ' << format.sentence_delimiter << ' ';
            for (std::size_t w = 0; w < doc.sentences[s].size(); ++w) {
                if (w > 0) out << ' ';
                out << doc.sentences[s][w];
            }
        }
        out << '\n';
    }
}

void write_corpus(const std::filesystem::path& path, std::span<const ReviewDoc> docs, const CorpusFormat& format)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::data, "cannot write " + path.string());
    write_corpus(out, docs, format);
}

// ---- vocabulary ------------------------------------------------------------

Dictionary::Dictionary(std::vector<std::string> reserved)
{
    for (auto& token : reserved) add(token);
    m_reserved = m_tokens.size();
}

TokenId Dictionary::add(const std::string& token)
{
    if (auto it = m_ids.find(token); it != m_ids.end()) return it->second;
    const auto id = static_cast<TokenId>(m_tokens.size());
    m_tokens.push_back(token);
    m_ids.emplace(token, id);
    return id;
}

std::optional<TokenId> Dictionary::find(std::string_view token) const
{
    if (auto it = m_ids.find(std::string(token)); it != m_ids.end()) return it->second;
    return std::nullopt;
}

TokenId Dictionary::lookup(std::string_view token, TokenId fallback) const
{
    return find(token).value_or(fallback);
}

std::uint64_t Dictionary::hash() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    };
    for (const auto& token : m_tokens) {
        for (char c : token) mix(static_cast<unsigned char>(c));
        mix(0x1f);
    }
    return h;
}

VocabularyHashes Vocabulary::hashes() const
{
    return {words.hash(), users.hash(), products.hash()};
}

void Vocabulary::save(std::ostream& out) const
{
    out << kVocabMagic << '\n';
    out << "# min_frequency=" << min_frequency << '\n';
    out << "# words=" << words.size() << " users=" << users.size() << " products=" << products.size() << '\n';
    auto section = [&out](std::string_view name, const Dictionary& dict) {
        out << '@' << name << '\n';
        for (std::size_t i = 0; i < dict.size(); ++i) out << dict.tokens()[i] << '\t' << i << '\n';
    };
    section("words", words);
    section("users", users);
    section("products", products);
}

void Vocabulary::save(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::data, "cannot write " + path.string());
    save(out);
}

Vocabulary Vocabulary::load(std::istream& in)
{
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line) || trim(line) != kVocabMagic) fail(ErrorKind::data, "not a vocabulary file");
    ++line_no;

    Dictionary* current = nullptr;
    std::vector<std::string> tokens;
    auto flush = [&]() {
        if (current == nullptr) return;
        if (tokens.size() < current->reserved()) fail(ErrorKind::data, "vocabulary section lacks reserved entries");
        Dictionary fresh(std::vector<std::string>(tokens.begin(), tokens.begin() +
                                                                       static_cast<std::ptrdiff_t>(current->reserved())));
        for (std::size_t i = fresh.size(); i < tokens.size(); ++i) fresh.add(tokens[i]);
        if (fresh.size() != tokens.size()) fail(ErrorKind::data, "vocabulary section has duplicate tokens");
        *current = std::move(fresh);
        tokens.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            if (line.rfind("# min_frequency=", 0) == 0) {
                vocab.min_frequency = std::stoul(line.substr(16));
                continue;
            }
            if (line[0] == '#') continue;
            flush();
            if (line == "@words") current = &vocab.words;
            else if (line == "@users") current = &vocab.users;
            else if (line == "@products") current = &vocab.products;
            else data_error(line_no, "unknown vocabulary section '" + line + "'");
            continue;
        }
        if (current == nullptr) data_error(line_no, "entry outside a section");
        const std::string_view id_text = std::string_view(line).substr(tab + 1);
        std::size_t id = 0;
        const auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
        if (ec != std::errc() || ptr != id_text.data() + id_text.size()) data_error(line_no, "malformed id");
        if (id != tokens.size()) data_error(line_no, "ids must be dense and ascending");
        tokens.push_back(line.substr(0, tab));
    }
    flush();
    if (vocab.words.size() < 2 || vocab.words.token(kPad) != "<pad>" || vocab.words.token(kUnk) != "<unk>")
        fail(ErrorKind::data, "vocabulary is missing reserved word entries");
    return vocab;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path)
{
    auto in = open_input(path);
    return load(in);
}

void VocabularyBuilder::add(const ReviewDoc& doc)
{
    ++m_documents;
    ++m_users[doc.user];
    ++m_products[doc.product];
    for (const auto& sentence : doc.sentences)
        for (const auto& word : sentence) ++m_word_counts[word];
}

Vocabulary VocabularyBuilder::finish(std::size_t min_frequency) const
{
    if (m_documents == 0) fail(ErrorKind::data, "cannot build a vocabulary from an empty training set");

    Vocabulary vocab;
    vocab.min_frequency = min_frequency;
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    std::uint64_t unk = 0;
    for (const auto& [word, count] : m_word_counts) {
        if (vocab.words.find(word)) continue;  // literal "<pad>"/"<unk>" in text
        if (count >= min_frequency) kept.emplace_back(word, count);
        else unk += count;
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    vocab.word_frequency = {0, unk};
    for (const auto& [word, count] : kept) {
        vocab.words.add(word);
        vocab.word_frequency.push_back(count);
    }
    for (const auto& entry : m_users) vocab.users.add(entry.first);
    for (const auto& entry : m_products) vocab.products.add(entry.first);
    return vocab;
}

Vocabulary build_vocab(std::span<const ReviewDoc> train_docs, std::size_t min_frequency)
{
    VocabularyBuilder builder;
    for (const auto& doc : train_docs) builder.add(doc);
    return builder.finish(min_frequency);
}

// ---- encoding --------------------------------------------------------------

std::size_t EncodedDoc::max_sentence_length() const
{
    std::size_t n = 0;
    for (const auto& s : sentences) n = std::max(n, s.size());
    return n;
}

EncodedDoc encode_document(const ReviewDoc& doc, const Vocabulary& vocab, const EncodeLimits& limits,
                           EncodeStats* stats)
{
    EncodeStats local;
    EncodeStats& st = stats != nullptr ? *stats : local;
    ++st.documents;

    EncodedDoc out;
    out.label = doc.label;
    out.user = vocab.users.lookup(doc.user, Vocabulary::kUnkUser);
    out.product = vocab.products.lookup(doc.product, Vocabulary::kUnkProduct);
    if (out.user == Vocabulary::kUnkUser) ++st.unk_users;
    if (out.product == Vocabulary::kUnkProduct) ++st.unk_products;

    const std::size_t n_sents = std::min(doc.sentences.size(), limits.max_sentences);
    if (doc.sentences.size() > limits.max_sentences) ++st.truncated_documents;
    out.sentences.reserve(n_sents);
    for (std::size_t s = 0; s < n_sents; ++s) {
        const auto& words = doc.sentences[s];
        const std::size_t n_words = std::min(words.size(), limits.max_words);
        if (words.size() > limits.max_words) ++st.truncated_sentences;
        std::vector<TokenId> ids(n_words);
        for (std::size_t w = 0; w < n_words; ++w) {
            TokenId id = vocab.words.lookup(words[w], Vocabulary::kUnk);
            if (id == Vocabulary::kPad) id = Vocabulary::kUnk;
            if (id == Vocabulary::kUnk) ++st.unk_tokens;
            ids[w] = id;
        }
        st.tokens += n_words;
        out.sentences.push_back(std::move(ids));
    }
    return out;
}

std::vector<EncodedDoc> encode(std::span<const ReviewDoc> docs, const Vocabulary& vocab, const EncodeLimits& limits,
                               EncodeStats* stats)
{
    std::vector<EncodedDoc> out;
    out.reserve(docs.size());
    for (const auto& doc : docs) out.push_back(encode_document(doc, vocab, limits, stats));
    return out;
}

std::vector<EncodedDoc> encode_file(const std::filesystem::path& path, const CorpusFormat& format,
                                    const Vocabulary& vocab, const EncodeLimits& limits, EncodeStats* stats)
{
    std::vector<EncodedDoc> out;
    for_each_document(path, format,
                      [&](ReviewDoc&& doc) { out.push_back(encode_document(doc, vocab, limits, stats)); });
    return out;
}

std::size_t DocGrid::sentence_count() const
{
    return static_cast<std::size_t>(std::count(sentence_mask.begin(), sentence_mask.end(), true));
}

std::size_t DocGrid::sentence_length(std::size_t row) const
{
    const auto& mask = word_mask[row];
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

DocGrid make_grid(const EncodedDoc& doc, std::size_t rows, std::size_t cols)
{
    const std::size_t n = doc.sentences.size();
    const std::size_t longest = doc.max_sentence_length();
    if (rows == 0) rows = n;
    if (cols == 0) cols = longest;
    if (rows < n || cols < longest) {
        fail(ErrorKind::data, "grid " + std::to_string(rows) + "x" + std::to_string(cols) + " cannot hold a " +
                                  std::to_string(n) + "-sentence document with sentences up to " +
                                  std::to_string(longest) + " words");
    }

    DocGrid grid;
    grid.rows = rows;
    grid.cols = cols;
    grid.user = doc.user;
    grid.product = doc.product;
    grid.label = doc.label;
    grid.ids.assign(rows * cols, Vocabulary::kPad);
    grid.word_mask.assign(rows, std::vector<bool>(cols, false));
    grid.sentence_mask.assign(rows, false);
    for (std::size_t s = 0; s < n; ++s) {
        grid.sentence_mask[s] = true;
        for (std::size_t w = 0; w < doc.sentences[s].size(); ++w) {
            grid.ids[s * cols + w] = doc.sentences[s][w];
            grid.word_mask[s][w] = true;
        }
    }
    return grid;
}

// ---- embeddings ------------------------------------------------------------

EmbeddingTable random_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed, double range)
{
    EmbeddingTable table;
    table.rows = vocab.words.size();
    table.dim = dim;
    table.values.assign(table.rows * dim, 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(-range, range);
    for (std::size_t r = 1; r < table.rows; ++r)
        for (std::size_t c = 0; c < dim; ++c) table.values[r * dim + c] = uniform(rng);
    table.random_rows = table.rows - 1;
    return table;
}

EmbeddingTable load_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim, std::uint64_t seed,
                               double range)
{
    EmbeddingTable table = random_embeddings(vocab, dim, seed, range);
    std::vector<bool> loaded(table.rows, false);

    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto fields = split_whitespace(line);
        if (fields.empty()) continue;

        if (first) {
            first = false;
            if (fields.size() == 2) {
                std::size_t count = 0, header_dim = 0;
                const auto& a = fields[0];
                const auto& b = fields[1];
                const bool numeric =
                    std::from_chars(a.data(), a.data() + a.size(), count).ptr == a.data() + a.size() &&
                    std::from_chars(b.data(), b.data() + b.size(), header_dim).ptr == b.data() + b.size();
                if (numeric) {
                    if (header_dim != dim) {
                        fail(ErrorKind::data, "embedding dimension mismatch: file declares " +
                                                  std::to_string(header_dim) + ", expected " + std::to_string(dim));
                    }
                    continue;
                }
            }
        }

        if (fields.size() != dim + 1) {
            data_error(line_no, "embedding dimension mismatch: expected " + std::to_string(dim) + " values, found " +
                                    std::to_string(fields.size() - 1));
        }
        std::vector<double> row(dim);
        for (std::size_t c = 0; c < dim; ++c) {
            const auto& f = fields[c + 1];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[c]);
            if (ec != std::errc() || ptr != f.data() + f.size()) data_error(line_no, "malformed value '" + f + "'");
        }
        const auto id = vocab.words.find(fields[0]);
        if (!id || *id == Vocabulary::kPad) continue;
        const auto r = static_cast<std::size_t>(*id);
        std::copy(row.begin(), row.end(), table.values.begin() + static_cast<std::ptrdiff_t>(r * dim));
        loaded[r] = true;
    }
    table.loaded_rows = static_cast<std::size_t>(std::count(loaded.begin(), loaded.end(), true));
    table.random_rows = table.rows - 1 - table.loaded_rows;
    return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim,
                               std::uint64_t seed, double range)
{
    auto in = open_input(path);
    try {
        return load_embeddings(in, vocab, dim, seed, range);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

// ---- synthetic corpus ------------------------------------------------------

namespace synthetic {

namespace {
constexpr std::size_t kPoolSize = 4;
constexpr std::size_t kFillers = 20;

std::string_view sign_name(int v)
{
    return v < 0 ? "minus" : (v > 0 ? "plus" : "zero");
}
}  // namespace

std::string sentiment_token(std::size_t level, std::size_t k)
{
    return "lvl" + std::to_string(level) + "_" + std::to_string(k);
}

std::optional<std::size_t> sentiment_level(std::string_view token)
{
    if (token.rfind("lvl", 0) != 0) return std::nullopt;
    const auto underscore = token.find('_');
    if (underscore == std::string_view::npos) return std::nullopt;
    std::size_t level = 0;
    const auto digits = token.substr(3, underscore - 3);
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), level);
    if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
    return level;
}

std::string user_marker(int bias)
{
    return "umark_" + std::string(sign_name(bias));
}

std::string product_marker(int quality)
{
    return "pmark_" + std::string(sign_name(quality));
}

}  // namespace synthetic

SyntheticCorpus gen_synthetic(const SyntheticConfig& config)
{
    if (config.classes < 2) fail(ErrorKind::config, "synthetic corpus needs at least 2 classes");
    if (config.users == 0 || config.products == 0) fail(ErrorKind::config, "synthetic corpus needs users and products");

    std::mt19937_64 rng(config.seed);
    auto uniform_int = [&rng](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    auto shift = [&]() { return config.neutral ? 0 : static_cast<int>(uniform_int(0, 2)) - 1; };

    SyntheticCorpus corpus;
    std::vector<std::string> users, products;
    for (std::size_t i = 0; i < config.users; ++i) {
        users.push_back("user" + std::to_string(i));
        corpus.user_bias[users.back()] = shift();
    }
    for (std::size_t i = 0; i < config.products; ++i) {
        products.push_back("product" + std::to_string(i));
        corpus.product_quality[products.back()] = shift();
    }

    auto filler = [&]() { return "w" + std::to_string(uniform_int(0, synthetic::kFillers - 1)); };
    auto marker_sentence = [&](std::string (*marker)(int)) {
        std::vector<std::string> s = {marker(-1), marker(0), marker(1)};
        for (std::size_t k = uniform_int(0, 2); k > 0; --k) s.push_back(filler());
        std::shuffle(s.begin(), s.end(), rng);
        return s;
    };

    std::vector<ReviewDoc> docs;
    std::vector<SyntheticDocInfo> info;
    docs.reserve(config.documents);
    for (std::size_t d = 0; d < config.documents; ++d) {
        ReviewDoc doc;
        doc.user = users[uniform_int(0, users.size() - 1)];
        doc.product = products[uniform_int(0, products.size() - 1)];
        SyntheticDocInfo meta;
        meta.base = uniform_int(0, config.classes - 1);
        meta.user_bias = corpus.user_bias[doc.user];
        meta.product_quality = corpus.product_quality[doc.product];

        for (std::size_t s = uniform_int(1, 2); s > 0; --s) {
            std::vector<std::string> sentence;
            for (std::size_t k = uniform_int(1, 2); k > 0; --k)
                sentence.push_back(synthetic::sentiment_token(meta.base, uniform_int(0, synthetic::kPoolSize - 1)));
            for (std::size_t k = uniform_int(1, 3); k > 0; --k) sentence.push_back(filler());
            std::shuffle(sentence.begin(), sentence.end(), rng);
            doc.sentences.push_back(std::move(sentence));
        }
        doc.sentences.push_back(marker_sentence(synthetic::user_marker));
        doc.sentences.push_back(marker_sentence(synthetic::product_marker));
        std::shuffle(doc.sentences.begin(), doc.sentences.end(), rng);

        const long label = static_cast<long>(meta.base) + meta.user_bias + meta.product_quality;
        doc.label = static_cast<std::size_t>(std::clamp<long>(label, 0, static_cast<long>(config.classes) - 1));
        docs.push_back(std::move(doc));
        info.push_back(meta);
    }

    const auto n = docs.size();
    const auto n_dev = static_cast<std::size_t>(static_cast<double>(n) * config.dev_fraction + 0.5);
    const auto n_test = static_cast<std::size_t>(static_cast<double>(n) * config.test_fraction + 0.5);
    const auto n_train = n - std::min(n, n_dev + n_test);
    auto slice = [&](auto& src, std::size_t from, std::size_t to) {
        using T = typename std::decay_t<decltype(src)>::value_type;
        return std::vector<T>(src.begin() + static_cast<std::ptrdiff_t>(from),
                              src.begin() + static_cast<std::ptrdiff_t>(std::min(to, n)));
    };
    corpus.train = slice(docs, 0, n_train);
    corpus.dev = slice(docs, n_train, n_train + n_dev);
    corpus.test = slice(docs, n_train + n_dev, n);
    corpus.train_info = slice(info, 0, n_train);
    corpus.dev_info = slice(info, n_train, n_train + n_dev);
    corpus.test_info = slice(info, n_train + n_dev, n);
    return corpus;
}

}  // namespace huapa
