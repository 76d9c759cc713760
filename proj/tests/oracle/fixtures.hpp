#pragma once

#include "huapa/data.hpp"
#include "huapa/model.hpp"

#include <memory>
#include <random>

namespace fixtures {

inline huapa::ModelDims toy_dims()
{
    huapa::ModelDims d;
    d.word = 5;
    d.user = 3;
    d.product = 3;
    d.hidden = 4;
    d.attention = 4;
    d.classes = 3;
    return d;
}

inline huapa::VocabularySizes toy_sizes()
{
    return {20, 4, 4};
}

// Every parameter (word embeddings included) drawn from U(-range, range)
// with biases left nonzero too, so no term of the forward pass is trivial.
inline std::unique_ptr<huapa::HuapaModel> toy_model(huapa::Variant variant, std::uint64_t seed, double range = 0.3,
                                                    huapa::ModelDims dims = toy_dims(),
                                                    huapa::VocabularySizes sizes = toy_sizes())
{
    auto model = std::make_unique<huapa::HuapaModel>(dims, variant, sizes);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-range, range);
    for (auto& p : model->params())
        for (double& x : p.data()) x = u(rng);
    auto emb = model->params().find("word_embedding")->data();
    for (std::size_t j = 0; j < dims.word; ++j) emb[j] = 0.0;  // PAD row
    return model;
}

inline huapa::EncodedDoc random_doc(std::mt19937_64& rng, const huapa::VocabularySizes& sizes, std::size_t classes,
                                    std::size_t max_sentences = 4, std::size_t max_words = 6)
{
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    huapa::EncodedDoc doc;
    doc.user = static_cast<huapa::TokenId>(pick(0, sizes.users - 1));
    doc.product = static_cast<huapa::TokenId>(pick(0, sizes.products - 1));
    doc.label = pick(0, classes - 1);
    doc.sentences.resize(pick(1, max_sentences));
    for (auto& s : doc.sentences) {
        s.resize(pick(1, max_words));
        for (auto& id : s) id = static_cast<huapa::TokenId>(pick(1, sizes.words - 1));
    }
    return doc;
}

}  // namespace fixtures
