#include "commands.hpp"

#include "attention_page.hpp"

#include "huapa/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

namespace huapa::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::config: return kExitUsage;
    case ErrorKind::data: return kExitData;
    case ErrorKind::numeric: return kExitNumeric;
    case ErrorKind::shape: return kExitNumeric;
    }
    return kExitUsage;
}

std::string unescape(std::string_view text)
{
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '\\' || i + 1 == text.size()) {
            out += text[i];
            continue;
        }
        switch (text[++i]) {
        case 't': out += '\t'; break;
        case 'n': out += '\n'; break;
        case '\\': out += '\\'; break;
        default:
            out += '\\';
            out += text[i];
        }
    }
    return out;
}

json record(std::string_view kind)
{
    return json{{"schema", kSchemaVersion}, {"record", kind}};
}

json error_record(const Error& error)
{
    json r = record("error");
    r["kind"] = to_string(error.kind());
    r["message"] = error.what();
    r["exit_code"] = exit_code_for(error.kind());
    return r;
}

json to_json(const EpochLog& log)
{
    json r = record("epoch");
    r["epoch"] = log.epoch;
    r["loss"] = log.loss;
    r["loss1"] = log.loss1;
    r["loss2"] = log.loss2;
    r["loss3"] = log.loss3;
    r["dev_acc"] = log.dev_accuracy;
    r["dev_rmse"] = log.dev_rmse;
    r["best_dev_acc"] = log.best_dev_accuracy;
    r["best_epoch"] = log.best_epoch;
    return r;
}

json to_json(const EvalResult& result)
{
    json r = record("metrics");
    r["accuracy"] = result.accuracy;
    r["rmse"] = result.rmse;
    r["n"] = result.count;
    r["classes"] = result.classes;
    json rows = json::array();
    for (std::size_t g = 0; g < result.classes; ++g) {
        json row = json::array();
        for (std::size_t p = 0; p < result.classes; ++p) row.push_back(result.at(g, p));
        rows.push_back(std::move(row));
    }
    r["confusion"] = std::move(rows);
    return r;
}

json to_json(const EncodeStats& stats)
{
    json r = record("encode");
    r["documents"] = stats.documents;
    r["truncated_documents"] = stats.truncated_documents;
    r["truncated_sentences"] = stats.truncated_sentences;
    r["tokens"] = stats.tokens;
    r["unk_tokens"] = stats.unk_tokens;
    r["unk_rate"] = stats.unk_rate();
    r["unk_users"] = stats.unk_users;
    r["unk_products"] = stats.unk_products;
    return r;
}

namespace {

void require_file(const fs::path& path, const char* what)
{
    std::error_code ec;
    if (!fs::is_regular_file(path, ec))
        fail(ErrorKind::data, std::string(what) + " not found: " + path.string());
}

std::ofstream open_output(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::data, "cannot write " + path.string());
    return out;
}

void emit(std::ostream& out, const json& r)
{
    out << r.dump() << '\n' << std::flush;
}

CorpusFormat corpus_format(const std::string& fs_sep, const std::string& delim, bool lowercase, std::size_t classes)
{
    CorpusFormat f;
    f.field_separator = fs_sep;
    f.sentence_delimiter = delim;
    f.lowercase = lowercase;
    f.num_classes = classes;
    return f;
}

fs::path vocabulary_for(const fs::path& checkpoint, const fs::path& explicit_path)
{
    if (!explicit_path.empty()) return explicit_path;
    return checkpoint.parent_path() / "vocab.tsv";
}

}  // namespace

void RunConfig::validate() const
{
    if (format.field_separator.empty()) fail(ErrorKind::config, "field separator is empty");
    if (format.sentence_delimiter.empty()) fail(ErrorKind::config, "sentence delimiter is empty");
    if (format.num_classes < 2) fail(ErrorKind::config, "need at least two classes");
    if (dims.classes != format.num_classes) fail(ErrorKind::config, "model classes differ from corpus classes");
    for (std::size_t d : {dims.word, dims.user, dims.product, dims.hidden, dims.attention})
        if (d == 0) fail(ErrorKind::config, "model dimensions must be positive");
    if (limits.max_sentences == 0 || limits.max_words == 0) fail(ErrorKind::config, "truncation limits must be positive");
    if (min_frequency == 0) fail(ErrorKind::config, "min frequency must be at least 1");
    if (!(init_range > 0.0) || !(word_init_range > 0.0)) fail(ErrorKind::config, "init ranges must be positive");
    if (output_dir.empty()) fail(ErrorKind::config, "output directory not set");
    train.validate();

    if (train_path.empty()) fail(ErrorKind::config, "train corpus not set");
    if (dev_path.empty()) fail(ErrorKind::config, "dev corpus not set");
    require_file(train_path, "train corpus");
    require_file(dev_path, "dev corpus");
    if (!test_path.empty()) require_file(test_path, "test corpus");
    if (!embeddings_path.empty()) require_file(embeddings_path, "embeddings file");
}

TrainOutputs cmd_train(const RunConfig& config, std::ostream& out)
{
    config.validate();
    fs::create_directories(config.output_dir);

    VocabularyBuilder builder;
    for_each_document(config.train_path, config.format, [&](ReviewDoc&& doc) { builder.add(doc); });
    const Vocabulary vocab = builder.finish(config.min_frequency);
    {
        json r = record("vocabulary");
        r["words"] = vocab.words.size();
        r["users"] = vocab.users.size();
        r["products"] = vocab.products.size();
        r["min_frequency"] = config.min_frequency;
        emit(out, r);
    }

    auto encode_split = [&](const fs::path& path, const char* split) {
        EncodeStats stats;
        auto docs = encode_file(path, config.format, vocab, config.limits, &stats);
        json r = to_json(stats);
        r["split"] = split;
        emit(out, r);
        return docs;
    };
    const auto train_docs = encode_split(config.train_path, "train");
    const auto dev_docs = encode_split(config.dev_path, "dev");
    std::vector<EncodedDoc> test_docs;
    if (!config.test_path.empty()) test_docs = encode_split(config.test_path, "test");

    const EmbeddingTable embeddings =
        config.embeddings_path.empty()
            ? random_embeddings(vocab, config.dims.word, config.train.seed, config.word_init_range)
            : load_embeddings(config.embeddings_path, vocab, config.dims.word, config.train.seed,
                              config.word_init_range);
    {
        json r = record("embeddings");
        r["rows"] = embeddings.rows;
        r["dim"] = embeddings.dim;
        r["loaded_rows"] = embeddings.loaded_rows;
        r["random_rows"] = embeddings.random_rows;
        emit(out, r);
    }

    HuapaModel model(config.dims, config.variant, {vocab.words.size(), vocab.users.size(), vocab.products.size()});
    model.init_uniform(config.train.seed, config.init_range);
    model.set_word_embeddings(embeddings);

    TrainOutputs outputs;
    outputs.vocabulary = config.output_dir / "vocab.tsv";
    outputs.checkpoint = config.output_dir / "model.ckpt";
    outputs.epoch_log = config.output_dir / "epochs.jsonl";
    outputs.metrics = config.output_dir / "metrics.jsonl";
    outputs.parameter_count = model.params().scalar_count();
    vocab.save(outputs.vocabulary);

    std::ofstream epoch_log = open_output(outputs.epoch_log);
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochLog& log) {
        const json r = to_json(log);
        epoch_log << r.dump() << '\n' << std::flush;
        emit(out, r);
    };
    outputs.result = train(config.train, model, train_docs, dev_docs, hooks);
    epoch_log.close();

    save_checkpoint(outputs.checkpoint, model, vocab.hashes());

    std::ofstream metrics = open_output(outputs.metrics);
    {
        json r = record("train_summary");
        r["variant"] = to_string(config.variant);
        r["epochs"] = outputs.result.epochs.size();
        r["best_epoch"] = outputs.result.best_epoch;
        r["best_dev_acc"] = outputs.result.best_dev_accuracy;
        r["adam_steps"] = outputs.result.steps;
        r["parameters"] = outputs.parameter_count;
        metrics << r.dump() << '\n';
        emit(out, r);
    }
    if (!test_docs.empty()) {
        outputs.test = evaluate(model, test_docs, config.train.eval_threads);
        json r = to_json(*outputs.test);
        r["split"] = "test";
        metrics << r.dump() << '\n';
        emit(out, r);
    }
    return outputs;
}

EvalResult cmd_eval(const EvalOptions& options, std::ostream& out)
{
    require_file(options.checkpoint, "checkpoint");
    const fs::path vocab_path = vocabulary_for(options.checkpoint, options.vocabulary);
    require_file(vocab_path, "vocabulary");
    require_file(options.corpus, "corpus");
    if (options.threads == 0) fail(ErrorKind::config, "eval threads must be positive");

    const Vocabulary vocab = Vocabulary::load(vocab_path);
    const Checkpoint ckpt = load_checkpoint(options.checkpoint, vocab);
    const CorpusFormat format = corpus_format(options.field_separator, options.sentence_delimiter, options.lowercase,
                                              ckpt.model->dims().classes);
    const auto docs = encode_file(options.corpus, format, vocab, options.limits);
    if (docs.empty()) fail(ErrorKind::data, "corpus is empty: " + options.corpus.string());

    const EvalResult result = evaluate(*ckpt.model, docs, options.threads);
    char line[128];
    std::snprintf(line, sizeof(line), "accuracy=%.3f rmse=%.3f n=%zu", result.accuracy, result.rmse, result.count);
    out << line << '\n';
    json r = to_json(result);
    r["corpus"] = options.corpus.string();
    emit(out, r);
    return result;
}

namespace {

json view_weights(const ViewTrace& trace, std::size_t row, std::size_t length)
{
    const auto& w = trace.words.at(row);
    return json(std::vector<double>(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(length)));
}

}  // namespace

std::vector<ExportedDocument> cmd_attn_export(const ExportOptions& options, std::ostream& out)
{
    require_file(options.checkpoint, "checkpoint");
    const fs::path vocab_path = vocabulary_for(options.checkpoint, options.vocabulary);
    require_file(vocab_path, "vocabulary");
    require_file(options.corpus, "corpus");
    if (options.documents.empty()) fail(ErrorKind::config, "no documents selected");
    if (options.output_dir.empty()) fail(ErrorKind::config, "output directory not set");

    const Vocabulary vocab = Vocabulary::load(vocab_path);
    const Checkpoint ckpt = load_checkpoint(options.checkpoint, vocab);
    const HuapaModel& model = *ckpt.model;
    if (model.variant() == Variant::no_attention)
        fail(ErrorKind::config, "the no-attention baseline has no attention weights to export");

    const CorpusFormat format = corpus_format(options.field_separator, options.sentence_delimiter, options.lowercase,
                                              model.dims().classes);
    const std::set<std::size_t> wanted(options.documents.begin(), options.documents.end());
    std::map<std::size_t, ReviewDoc> selected;
    std::size_t index = 0;
    const std::size_t total = for_each_document(options.corpus, format, [&](ReviewDoc&& doc) {
        if (wanted.count(index) != 0) selected.emplace(index, std::move(doc));
        ++index;
    });
    for (std::size_t i : options.documents) {
        if (i >= total) {
            fail(ErrorKind::data, "document index " + std::to_string(i) + " out of range; corpus has " +
                                      std::to_string(total) + " documents");
        }
    }

    fs::create_directories(options.output_dir);
    std::ofstream jsonl = open_output(options.output_dir / "attention.jsonl");
    std::vector<ExportedDocument> exported;
    for (std::size_t i : options.documents) {
        const ReviewDoc& doc = selected.at(i);
        const EncodedDoc encoded = encode_document(doc, vocab, options.limits);
        const DocGrid grid = make_grid(encoded);
        ad::Tape tape(false);
        const ForwardOutput fwd = forward_huapa(tape, model, grid);

        json r = record("attention");
        r["doc_index"] = i;
        r["user"] = doc.user;
        r["product"] = doc.product;
        r["gold_rating"] = doc.label + 1;
        r["predicted_rating"] = predict(fwd) + 1;
        r["variant"] = to_string(model.variant());
        json sentences = json::array();
        for (std::size_t s = 0; s < encoded.sentences.size(); ++s) {
            const std::size_t len = encoded.sentences[s].size();
            json sentence;
            sentence["tokens"] = std::vector<std::string>(doc.sentences[s].begin(),
                                                          doc.sentences[s].begin() + static_cast<std::ptrdiff_t>(len));
            if (fwd.trace.user) sentence["user_word_weights"] = view_weights(*fwd.trace.user, s, len);
            if (fwd.trace.product) sentence["product_word_weights"] = view_weights(*fwd.trace.product, s, len);
            sentences.push_back(std::move(sentence));
        }
        r["sentences"] = std::move(sentences);
        if (fwd.trace.user) r["user_sentence_weights"] = fwd.trace.user->sentences;
        if (fwd.trace.product) r["product_sentence_weights"] = fwd.trace.product->sentences;

        ExportedDocument e;
        e.index = i;
        e.page = options.output_dir / ("attention_" + std::to_string(i) + ".html");
        std::ofstream page = open_output(e.page);
        page << render_attention_page(r);
        jsonl << r.dump() << '\n';
        e.record = std::move(r);
        exported.push_back(std::move(e));

        json note = record("exported");
        note["doc_index"] = i;
        note["page"] = exported.back().page.string();
        emit(out, note);
    }
    return exported;
}

void cmd_gen_synthetic(const SyntheticOptions& options, std::ostream& out)
{
    if (options.output_dir.empty()) fail(ErrorKind::config, "output directory not set");
    const SyntheticCorpus corpus = gen_synthetic(options.config);
    fs::create_directories(options.output_dir);
    CorpusFormat format;
    format.num_classes = options.config.classes;

    const std::pair<const char*, const std::vector<ReviewDoc>*> splits[] = {
        {"train", &corpus.train}, {"dev", &corpus.dev}, {"test", &corpus.test}};
    for (const auto& [name, docs] : splits) {
        const fs::path path = options.output_dir / (std::string(name) + ".txt");
        write_corpus(path, *docs, format);
        json r = record("synthetic_split");
        r["split"] = name;
        r["documents"] = docs->size();
        r["path"] = path.string();
        emit(out, r);
    }
}

}  // namespace huapa::cli
