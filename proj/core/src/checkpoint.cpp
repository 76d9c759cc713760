#include "huapa/checkpoint.hpp"

#include "huapa/error.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace huapa {

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'U', 'A', 'P', 'A', 'C', 'K', 'P'};

template <typename T>
void write_le(std::ostream& out, T value)
{
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
    out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in)
{
    std::array<unsigned char, sizeof(T)> bytes{};
    in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in) fail(ErrorKind::data, "checkpoint is truncated");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
    return value;
}

void write_f64(std::ostream& out, double v)
{
    write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

double read_f64(std::istream& in)
{
    return std::bit_cast<double>(read_le<std::uint64_t>(in));
}

[[noreturn]] void mismatch(const std::string& what)
{
    fail(ErrorKind::config, "checkpoint mismatch: " + what);
}

}  // namespace

void save_checkpoint(std::ostream& out, const HuapaModel& model, const VocabularyHashes& hashes)
{
    out.write(kMagic.data(), kMagic.size());
    write_le<std::uint32_t>(out, kCheckpointVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.variant()));
    const ModelDims& d = model.dims();
    for (std::size_t v : {d.word, d.user, d.product, d.hidden, d.attention, d.classes}) write_le<std::uint64_t>(out, v);
    const VocabularySizes& s = model.vocabulary_sizes();
    for (std::size_t v : {s.words, s.users, s.products}) write_le<std::uint64_t>(out, v);
    for (std::uint64_t h : {hashes.words, hashes.users, hashes.products}) write_le<std::uint64_t>(out, h);

    write_le<std::uint64_t>(out, model.params().size());
    for (const ad::Parameter& p : model.params()) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name().size()));
        out.write(p.name().data(), static_cast<std::streamsize>(p.name().size()));
        write_le<std::uint8_t>(out, p.trainable() ? 1 : 0);
        write_le<std::uint64_t>(out, p.shape().rows);
        write_le<std::uint64_t>(out, p.shape().cols);
        for (double v : p.data()) write_f64(out, v);
    }
    if (!out) fail(ErrorKind::data, "failed writing checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const HuapaModel& model, const VocabularyHashes& hashes)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::data, "cannot write " + path.string());
    save_checkpoint(out, model, hashes);
}

Checkpoint load_checkpoint(std::istream& in)
{
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) fail(ErrorKind::data, "not a checkpoint file");
    const auto version = read_le<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
        fail(ErrorKind::data, "unsupported checkpoint version " + std::to_string(version));
    }
    const auto variant_code = read_le<std::uint32_t>(in);
    if (variant_code > static_cast<std::uint32_t>(Variant::no_attention))
        fail(ErrorKind::data, "unknown variant code " + std::to_string(variant_code));

    ModelDims dims;
    dims.word = read_le<std::uint64_t>(in);
    dims.user = read_le<std::uint64_t>(in);
    dims.product = read_le<std::uint64_t>(in);
    dims.hidden = read_le<std::uint64_t>(in);
    dims.attention = read_le<std::uint64_t>(in);
    dims.classes = read_le<std::uint64_t>(in);
    VocabularySizes sizes;
    sizes.words = read_le<std::uint64_t>(in);
    sizes.users = read_le<std::uint64_t>(in);
    sizes.products = read_le<std::uint64_t>(in);

    Checkpoint ckpt;
    ckpt.hashes.words = read_le<std::uint64_t>(in);
    ckpt.hashes.users = read_le<std::uint64_t>(in);
    ckpt.hashes.products = read_le<std::uint64_t>(in);
    ckpt.model = std::make_unique<HuapaModel>(dims, static_cast<Variant>(variant_code), sizes);

    const auto count = read_le<std::uint64_t>(in);
    if (count != ckpt.model->params().size()) {
        mismatch("expected " + std::to_string(ckpt.model->params().size()) + " parameters, file has " +
                 std::to_string(count));
    }
    for (ad::Parameter& p : ckpt.model->params()) {
        const auto len = read_le<std::uint32_t>(in);
        if (len > 4096) fail(ErrorKind::data, "corrupt parameter name length");
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (!in) fail(ErrorKind::data, "checkpoint is truncated");
        if (name != p.name()) mismatch("expected parameter '" + p.name() + "', found '" + name + "'");
        const bool trainable = read_le<std::uint8_t>(in) != 0;
        const auto rows = read_le<std::uint64_t>(in);
        const auto cols = read_le<std::uint64_t>(in);
        if (trainable != p.trainable() || rows != p.shape().rows || cols != p.shape().cols) {
            mismatch("parameter '" + name + "' is " + ad::to_string({rows, cols}) + ", expected " +
                     ad::to_string(p.shape()));
        }
        for (double& v : p.data()) v = read_f64(in);
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::data, "cannot open " + path.string());
    try {
        return load_checkpoint(in);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Vocabulary& vocab)
{
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.hashes != vocab.hashes()) mismatch("vocabulary hash differs from the supplied vocabulary");
    const VocabularySizes& s = ckpt.model->vocabulary_sizes();
    if (s.words != vocab.words.size() || s.users != vocab.users.size() || s.products != vocab.products.size())
        mismatch("vocabulary sizes differ from the supplied vocabulary");
    return ckpt;
}

}  // namespace huapa
