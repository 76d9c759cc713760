#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>

using namespace huapa;
using namespace huapa::cli;

namespace {

struct FormatFlags {
    std::string field_separator = "\\t\\t";
    std::string sentence_delimiter = "<sssss>";
    bool no_lowercase = false;
    std::size_t max_sentences = 40;
    std::size_t max_words = 50;
};

void add_format_flags(CLI::App* cmd, FormatFlags& f)
{
    cmd->add_option("--field-sep", f.field_separator, "Field separator (escapes \\t \\n allowed)")
        ->capture_default_str();
    cmd->add_option("--sentence-delim", f.sentence_delimiter, "Sentence delimiter token")->capture_default_str();
    cmd->add_flag("--no-lowercase", f.no_lowercase, "Keep token case");
    cmd->add_option("--max-sentences", f.max_sentences, "Sentences kept per document")->capture_default_str();
    cmd->add_option("--max-words", f.max_words, "Words kept per sentence")->capture_default_str();
}

// CLI11 only reads config files attached to the top-level app, so the
// train --config file is spliced into the argument list by hand. Keys may
// sit at the top of the file or under [train]; flags on the command line win.
std::vector<std::string> expand_train_config(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty() || args.front() != "train") return args;
    std::string config_path;
    std::set<std::string> given;
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a.rfind("--", 0) != 0) continue;
        const std::string name = a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2);
        given.insert(name);
        if (name != "config") continue;
        if (a.find('=') != std::string::npos)
            config_path = a.substr(a.find('=') + 1);
        else if (i + 1 < args.size())
            config_path = args[i + 1];
    }
    if (config_path.empty()) return args;
    std::ifstream in(config_path);
    if (!in) throw CLI::FileError::Missing(config_path);
    std::vector<std::string> spliced;
    for (const CLI::ConfigItem& item : CLI::ConfigINI{}.from_config(in)) {
        if (!(item.parents.empty() || (item.parents.size() == 1 && item.parents.front() == "train"))) continue;
        if (item.name == "++" || item.name == "--" || given.count(item.name)) continue;
        for (const std::string& value : item.inputs) spliced.push_back("--" + item.name + "=" + value);
    }
    args.insert(args.begin() + 1, spliced.begin(), spliced.end());
    return args;
}

int report(const Error& e)
{
    std::cerr << error_record(e).dump() << '\n';
    return exit_code_for(e.kind());
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hierarchical user/product attention sentiment classifier"};
    app.require_subcommand(1);

    // ---- train
    RunConfig run;
    FormatFlags train_format;
    std::string variant = "huapa";
    std::string train_path, dev_path, test_path, embeddings_path, output_dir;
    auto* train_cmd = app.add_subcommand("train", "Build vocabulary, train, select on dev, score test");
    std::string config_path;
    train_cmd->add_option("--config", config_path, "INI file of option values; flags given on the command line win");
    train_cmd->add_option("--train", train_path, "Training corpus")->required();
    train_cmd->add_option("--dev", dev_path, "Dev corpus")->required();
    train_cmd->add_option("--test", test_path, "Test corpus");
    train_cmd->add_option("--embeddings", embeddings_path, "Word vectors in text format");
    train_cmd->add_option("--out", output_dir, "Output directory")->required();
    train_cmd->add_option("--variant", variant, "huapa | hua | hpa | no-attention-baseline")->capture_default_str();
    add_format_flags(train_cmd, train_format);
    train_cmd->add_option("--classes", run.dims.classes, "Rating levels")->capture_default_str();
    train_cmd->add_option("--min-freq", run.min_frequency, "Minimum training-split word count")->capture_default_str();
    train_cmd->add_option("--word-dim", run.dims.word)->capture_default_str();
    train_cmd->add_option("--user-dim", run.dims.user)->capture_default_str();
    train_cmd->add_option("--product-dim", run.dims.product)->capture_default_str();
    train_cmd->add_option("--hidden", run.dims.hidden, "LSTM units per direction")->capture_default_str();
    train_cmd->add_option("--attention", run.dims.attention)->capture_default_str();
    train_cmd->add_option("--lr", run.train.adam.lr)->capture_default_str();
    train_cmd->add_option("--beta1", run.train.adam.beta1)->capture_default_str();
    train_cmd->add_option("--beta2", run.train.adam.beta2)->capture_default_str();
    train_cmd->add_option("--eps", run.train.adam.eps)->capture_default_str();
    train_cmd->add_option("--lambda1", run.train.lambdas.main, "Main head loss weight")->capture_default_str();
    train_cmd->add_option("--lambda2", run.train.lambdas.user, "User head loss weight")->capture_default_str();
    train_cmd->add_option("--lambda3", run.train.lambdas.product, "Product head loss weight")->capture_default_str();
    train_cmd->add_option("--batch", run.train.batch_size)->capture_default_str();
    train_cmd->add_option("--epochs", run.train.max_epochs, "Maximum epochs")->capture_default_str();
    train_cmd->add_option("--patience", run.train.patience)->capture_default_str();
    train_cmd->add_option("--seed", run.train.seed)->capture_default_str();
    train_cmd->add_option("--clip-norm", run.train.clip_norm, "0 disables")->capture_default_str();
    train_cmd->add_option("--eval-threads", run.train.eval_threads)->capture_default_str();
    train_cmd->add_option("--init-range", run.init_range)->capture_default_str();
    train_cmd->add_option("--word-init-range", run.word_init_range, "Range for words missing from --embeddings")
        ->capture_default_str();

    // ---- eval
    EvalOptions eval;
    FormatFlags eval_format;
    auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a corpus");
    eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
    eval_cmd->add_option("--vocab", eval.vocabulary, "Defaults to vocab.tsv beside the checkpoint");
    eval_cmd->add_option("--corpus", eval.corpus)->required();
    eval_cmd->add_option("--threads", eval.threads)->capture_default_str();
    add_format_flags(eval_cmd, eval_format);

    // ---- attn-export
    ExportOptions exp;
    FormatFlags exp_format;
    auto* exp_cmd = app.add_subcommand("attn-export", "Write attention records and heat-shaded pages");
    exp_cmd->add_option("--checkpoint", exp.checkpoint)->required();
    exp_cmd->add_option("--vocab", exp.vocabulary, "Defaults to vocab.tsv beside the checkpoint");
    exp_cmd->add_option("--corpus", exp.corpus)->required();
    exp_cmd->add_option("--out", exp.output_dir)->required();
    exp_cmd->add_option("--doc", exp.documents, "0-based document index (repeatable)")->required();
    add_format_flags(exp_cmd, exp_format);

    // ---- gen-synthetic
    SyntheticOptions syn;
    auto* syn_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic review corpus (train/dev/test)");
    syn_cmd->add_option("--out", syn.output_dir)->required();
    syn_cmd->add_option("--seed", syn.config.seed)->capture_default_str();
    syn_cmd->add_option("--documents", syn.config.documents)->capture_default_str();
    syn_cmd->add_option("--users", syn.config.users)->capture_default_str();
    syn_cmd->add_option("--products", syn.config.products)->capture_default_str();
    syn_cmd->add_option("--classes", syn.config.classes)->capture_default_str();
    syn_cmd->add_option("--dev-fraction", syn.config.dev_fraction)->capture_default_str();
    syn_cmd->add_option("--test-fraction", syn.config.test_fraction)->capture_default_str();
    syn_cmd->add_flag("--neutral", syn.config.neutral, "All user biases and product qualities zero");

    try {
        std::vector<std::string> args = expand_train_config(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << [&] {
            auto r = record("error");
            r["kind"] = "usage";
            r["message"] = e.what();
            r["exit_code"] = static_cast<int>(kExitUsage);
            return r.dump();
        }() << '\n';
        return kExitUsage;
    }

    auto apply_limits = [](const FormatFlags& f, EncodeLimits& limits) {
        limits.max_sentences = f.max_sentences;
        limits.max_words = f.max_words;
    };

    try {
        if (*train_cmd) {
            run.variant = parse_variant(variant);
            run.train_path = train_path;
            run.dev_path = dev_path;
            run.test_path = test_path;
            run.embeddings_path = embeddings_path;
            run.output_dir = output_dir;
            run.format.field_separator = unescape(train_format.field_separator);
            run.format.sentence_delimiter = train_format.sentence_delimiter;
            run.format.lowercase = !train_format.no_lowercase;
            run.format.num_classes = run.dims.classes;
            apply_limits(train_format, run.limits);
            cmd_train(run, std::cout);
        } else if (*eval_cmd) {
            eval.field_separator = unescape(eval_format.field_separator);
            eval.sentence_delimiter = eval_format.sentence_delimiter;
            eval.lowercase = !eval_format.no_lowercase;
            apply_limits(eval_format, eval.limits);
            cmd_eval(eval, std::cout);
        } else if (*exp_cmd) {
            exp.field_separator = unescape(exp_format.field_separator);
            exp.sentence_delimiter = exp_format.sentence_delimiter;
            exp.lowercase = !exp_format.no_lowercase;
            apply_limits(exp_format, exp.limits);
            cmd_attn_export(exp, std::cout);
        } else if (*syn_cmd) {
            cmd_gen_synthetic(syn, std::cout);
        }
    } catch (const Error& e) {
        return report(e);
    } catch (const std::filesystem::filesystem_error& e) {
        return report(Error(ErrorKind::data, e.what()));
    } catch (const std::exception& e) {
        return report(Error(ErrorKind::config, e.what()));
    }
    return kExitOk;
}
