#include "reference_lda.hpp"

namespace testutil {

ReferenceLda::ReferenceLda(const newsflow::DocumentSet& ds, const std::vector<std::int32_t>& flat, int K_, int V_,
                           double alpha_, double beta_)
    : K(K_), V(V_), alpha(alpha_), beta(beta_) {
    nkw.assign(K, std::vector<int>(V, 0));
    nk.assign(K, 0);
    for (std::size_t d = 0; d < ds.size(); ++d) {
        std::vector<int> words, topics;
        std::vector<int> counts(K, 0);
        for (auto i = ds.offsets[d]; i < ds.offsets[d + 1]; ++i) {
            const int w = ds.words[i];
            const int k = flat[i];
            words.push_back(w);
            topics.push_back(k);
            ++counts[k];
            ++nkw[k][w];
            ++nk[k];
        }
        docs.push_back(words);
        z.push_back(topics);
        ndk.push_back(counts);
    }
}

void ReferenceLda::sweep(newsflow::CounterRng& rng) {
    std::vector<double> p(K);
    for (std::size_t d = 0; d < docs.size(); ++d) {
        for (std::size_t n = 0; n < docs[d].size(); ++n) {
            const int w = docs[d][n];
            int k = z[d][n];
            ndk[d][k] -= 1;
            nkw[k][w] -= 1;
            nk[k] -= 1;
            double acc = 0.0;
            for (int t = 0; t < K; ++t) {
                acc += (ndk[d][t] + alpha) * (nkw[t][w] + beta) / (static_cast<double>(nk[t]) + V * beta);
                p[t] = acc;
            }
            const double u = rng.uniform() * acc;
            k = K - 1;
            for (int t = 0; t < K; ++t) {
                if (u < p[t]) {
                    k = t;
                    break;
                }
            }
            z[d][n] = k;
            ndk[d][k] += 1;
            nkw[k][w] += 1;
            nk[k] += 1;
        }
    }
}

std::vector<std::int32_t> ReferenceLda::flat_z() const {
    std::vector<std::int32_t> out;
    for (const auto& zd : z) out.insert(out.end(), zd.begin(), zd.end());
    return out;
}

bool counts_match(const newsflow::LdaState& s, const newsflow::DocumentSet& ds) {
    ReferenceLda ref(ds, s.z, s.K, s.V, 0.0, 0.0);
    for (std::size_t d = 0; d < ds.size(); ++d)
        for (int k = 0; k < s.K; ++k)
            if (ref.ndk[d][k] != s.n_dk[d * static_cast<std::size_t>(s.K) + k]) return false;
    for (int k = 0; k < s.K; ++k) {
        if (ref.nk[k] != s.n_k[k]) return false;
        for (int w = 0; w < s.V; ++w)
            if (ref.nkw[k][w] != s.n_wk[static_cast<std::size_t>(w) * s.K + k]) return false;
    }
    return true;
}

}  // namespace testutil
