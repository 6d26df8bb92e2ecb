#include "densesvm/errors.hpp"
#include "densesvm/eval.hpp"

#include <random>
#include <string>

namespace densesvm::eval {

std::vector<std::size_t> FoldAssignment::test_indices(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
        if (fold[i] == f) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
        if (fold[i] != f) out.push_back(i);
    return out;
}

std::size_t FoldAssignment::fold_size(int f) const {
    std::size_t n = 0;
    for (int v : fold) n += v == f;
    return n;
}

FoldAssignment stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw BadK("k must be at least 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) pos.push_back(i);
        else if (labels[i] == -1) neg.push_back(i);
        else throw InvalidData("labels must be 1 or -1");
    }
    if (static_cast<std::size_t>(k) > labels.size())
        throw BadK("k = " + std::to_string(k) + " exceeds the sample count " + std::to_string(labels.size()));

    std::mt19937_64 rng(seed);
    const auto shuffle = [&](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(v[i - 1], v[pick(rng)]);
        }
    };
    shuffle(pos);
    shuffle(neg);

    FoldAssignment a{k, std::vector<int>(labels.size(), 0)};
    std::size_t slot = 0;
    for (const auto* cls : {&pos, &neg})
        for (std::size_t i : *cls) a.fold[i] = static_cast<int>(slot++ % static_cast<std::size_t>(k));
    return a;
}

}  // namespace densesvm::eval
