#pragma once

// Command implementations behind the `huapa` executable. Every
// machine-readable output is a single-line JSON record carrying
// {"schema": kSchemaVersion, "record": <kind>, ...}.

#include "huapa/data.hpp"
#include "huapa/error.hpp"
#include "huapa/model.hpp"
#include "huapa/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace huapa::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitNumeric = 3,
};

int exit_code_for(ErrorKind kind);

// Turns "\t" style escapes (\t, \n, \\) into the characters they name.
std::string unescape(std::string_view text);

nlohmann::json record(std::string_view kind);
nlohmann::json error_record(const Error& error);
nlohmann::json to_json(const EpochLog& log);
nlohmann::json to_json(const EvalResult& result);
nlohmann::json to_json(const EncodeStats& stats);

struct RunConfig {
    std::filesystem::path train_path;
    std::filesystem::path dev_path;
    std::filesystem::path test_path;        // optional
    std::filesystem::path embeddings_path;  // optional; random init otherwise
    std::filesystem::path output_dir;

    Variant variant = Variant::huapa;
    CorpusFormat format;
    EncodeLimits limits;
    std::size_t min_frequency = 2;
    ModelDims dims;
    TrainConfig train;
    double init_range = 0.01;
    double word_init_range = 0.01;

    // Checks option values and that every input path exists; throws before
    // any data is read.
    void validate() const;
};

struct TrainOutputs {
    std::filesystem::path checkpoint;
    std::filesystem::path vocabulary;
    std::filesystem::path epoch_log;
    std::filesystem::path metrics;
    TrainResult result;
    std::optional<EvalResult> test;
    std::size_t parameter_count = 0;
};

// Builds the vocabulary from the training split, encodes every split,
// trains, and writes vocab.tsv, model.ckpt, epochs.jsonl and metrics.jsonl
// into the output directory. Progress records go to `out`.
TrainOutputs cmd_train(const RunConfig& config, std::ostream& out);

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path vocabulary;  // defaults to vocab.tsv beside the checkpoint
    std::filesystem::path corpus;
    std::string field_separator = "\t\t";
    std::string sentence_delimiter = "<sssss>";
    bool lowercase = true;
    EncodeLimits limits;
    std::size_t threads = 1;
};

// Prints "accuracy=0.550 rmse=1.185 n=..." and a metrics record.
EvalResult cmd_eval(const EvalOptions& options, std::ostream& out);

struct ExportOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path vocabulary;
    std::filesystem::path corpus;
    std::filesystem::path output_dir;
    std::vector<std::size_t> documents;  // 0-based line order in the corpus
    std::string field_separator = "\t\t";
    std::string sentence_delimiter = "<sssss>";
    bool lowercase = true;
    EncodeLimits limits;
};

struct ExportedDocument {
    std::size_t index = 0;
    nlohmann::json record;
    std::filesystem::path page;
};

// Writes attention.jsonl (one record per selected document) and one
// attention_<index>.html page per document.
std::vector<ExportedDocument> cmd_attn_export(const ExportOptions& options, std::ostream& out);

struct SyntheticOptions {
    SyntheticConfig config;
    std::filesystem::path output_dir;
};

void cmd_gen_synthetic(const SyntheticOptions& options, std::ostream& out);

}  // namespace huapa::cli
