#include "attention_page.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace huapa::cli {

namespace {

std::string html_escape(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&#39;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string shade(const char* rgb, double intensity)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "rgba(%s,%.3f)", rgb, intensity);
    return buf;
}

void render_view(std::ostringstream& html, const nlohmann::json& record, const std::string& view, const char* title,
                 const char* rgb)
{
    const std::string word_key = view + "_word_weights";
    const std::string sentence_key = view + "_sentence_weights";
    if (!record.contains(sentence_key)) return;

    const auto& sentence_weights = record.at(sentence_key);
    html << "<section class=\"view\">\n<h2>" << title << "</h2>\n";
    for (std::size_t i = 0; i < record.at("sentences").size(); ++i) {
        const auto& sentence = record.at("sentences")[i];
        const auto weights = sentence.at(word_key).get<std::vector<double>>();
        const auto tokens = sentence.at("tokens").get<std::vector<std::string>>();
        const auto intensity = display_intensity(weights);
        const double beta = sentence_weights.at(i).get<double>();

        char beta_text[32];
        std::snprintf(beta_text, sizeof(beta_text), "%.3f", beta);
        html << "<p><span class=\"bar\" title=\"sentence weight " << beta_text << "\" style=\"background:"
             << shade(rgb, std::clamp(beta, 0.0, 1.0)) << "\"></span>";
        for (std::size_t j = 0; j < tokens.size(); ++j) {
            char w_text[32];
            std::snprintf(w_text, sizeof(w_text), "%.4f", weights[j]);
            html << "<span class=\"w\" title=\"" << w_text << "\" style=\"background:" << shade(rgb, intensity[j])
                 << "\">" << html_escape(tokens[j]) << "</span> ";
        }
        html << "</p>\n";
    }
    html << "</section>\n";
}

}  // namespace

std::vector<double> display_intensity(std::span<const double> weights)
{
    std::vector<double> out(weights.size(), 1.0);
    if (weights.empty()) return out;
    const auto [lo, hi] = std::minmax_element(weights.begin(), weights.end());
    const double range = *hi - *lo;
    if (range <= 0.0) return out;
    for (std::size_t i = 0; i < weights.size(); ++i) out[i] = (weights[i] - *lo) / range;
    return out;
}

std::string render_attention_page(const nlohmann::json& record)
{
    std::ostringstream html;
    html << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
         << "<title>Attention for document " << record.value("doc_index", 0) << "</title>\n"
         << "<style>\n"
         << "body{font-family:sans-serif;max-width:60em;margin:2em auto;line-height:2}\n"
         << ".w{padding:0.15em 0.25em;border-radius:3px}\n"
         << ".bar{display:inline-block;width:1.2em;height:0.9em;margin-right:0.6em;border:1px solid #999}\n"
         << ".view{margin-bottom:2em}\n"
         << "</style>\n</head>\n<body>\n";
    html << "<h1>Document " << record.value("doc_index", 0) << "</h1>\n";
    html << "<p>user " << html_escape(record.value("user", "")) << ", product "
         << html_escape(record.value("product", "")) << ", gold rating " << record.value("gold_rating", 0)
         << ", predicted rating " << record.value("predicted_rating", 0) << "</p>\n";
    render_view(html, record, "user", "User attention", "214,39,40");
    render_view(html, record, "product", "Product attention", "31,119,180");
    html << "</body>\n</html>\n";
    return html.str();
}

}  // namespace huapa::cli
