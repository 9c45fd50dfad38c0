#pragma once

#include <functional>
#include <vector>

#include "satnet/network_sim.hpp"

namespace satnet::testing {

// All partial matchings of the candidate list that obey the assignment
// rules, checked one rule at a time rather than by replaying the greedy
// pass: lone pairs take their satellite unless an earlier lone pair
// (by loss, then pair) already holds it; every unused non-lone option must
// be blocked by a used option that sorts before it, or by a lone pair.
inline std::vector<std::vector<int>> admissible_matchings(const std::vector<Candidate>& c, std::size_t pairs,
                                                          std::size_t sats) {
    std::vector<int> options(pairs, 0);
    for (const auto& x : c) ++options[x.pair];
    auto lone_before = [&](const Candidate& a, const Candidate& b) {
        return a.loss_db != b.loss_db ? a.loss_db < b.loss_db : a.pair < b.pair;
    };
    auto greedy_before = [](const Candidate& a, const Candidate& b) {
        if (a.loss_db != b.loss_db) return a.loss_db < b.loss_db;
        if (a.satellite != b.satellite) return a.satellite < b.satellite;
        return a.pair < b.pair;
    };

    std::vector<std::vector<int>> found;
    std::vector<int> current(pairs, 0);
    std::function<void(std::size_t)> rec = [&](std::size_t p) {
        if (p == pairs) {
            std::vector<int> used_by(sats + 1, -1);
            for (std::size_t q = 0; q < pairs; ++q)
                if (current[q] != 0) {
                    if (used_by[current[q]] >= 0) return;
                    used_by[current[q]] = static_cast<int>(q);
                }
            auto chosen = [&](const Candidate& x) { return current[x.pair] == x.satellite; };
            auto holder = [&](int s) -> const Candidate* {
                const int q = used_by[s];
                if (q < 0) return nullptr;
                for (const auto& x : c)
                    if (x.pair == static_cast<std::size_t>(q) && x.satellite == s) return &x;
                return nullptr;
            };
            for (const auto& x : c) {
                if (chosen(x)) continue;
                const Candidate* h = holder(x.satellite);
                if (options[x.pair] == 1) {
                    // Lone option left unused: its satellite must be held by a
                    // lone pair that ranks ahead.
                    if (h == nullptr || options[h->pair] != 1 || !lone_before(*h, x)) return;
                    continue;
                }
                if (current[x.pair] != 0) {
                    const Candidate* mine = nullptr;
                    for (const auto& y : c)
                        if (y.pair == x.pair && y.satellite == current[x.pair]) mine = &y;
                    if (greedy_before(*mine, x)) continue;
                }
                if (h != nullptr && (options[h->pair] == 1 || greedy_before(*h, x))) continue;
                return;
            }
            found.push_back(current);
            return;
        }
        current[p] = 0;
        rec(p + 1);
        for (const auto& x : c)
            if (x.pair == p) {
                current[p] = x.satellite;
                rec(p + 1);
                current[p] = 0;
            }
    };
    rec(0);
    return found;
}

}  // namespace satnet::testing
