// CRC-aided successive cancellation list decoding over the m bit-levels of
// the PPM label, with the dynamic list-doubling schedule on top.
//
// The path bookkeeping follows the lazy-copy scheme of Tal and Vardy: per
// stage there is a pool of LLR and partial-sum arrays, paths reference pool
// slots, clones share slots by reference count and detach on first write.
// LLR arrays are always rewritten whole, so detaching them copies nothing;
// partial-sum arrays are written one parity at a time and do copy.
//
// Bits decided inside the current level live in a persistent chain (parent
// pointer plus one bit) so cloning a path costs O(1); at a level boundary
// each surviving path materializes its chain, re-encodes it, and extends an
// immutable per-path history with the level's codeword folded into the
// label prefix of every symbol. The next level's channel LLRs then come
// from that path's own prefixes, which is what makes the multistage
// schedule path-specific.

#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <new>
#include <stdexcept>
#include <vector>

#include "pcm/channel.hpp"
#include "pcm/modulation.hpp"
#include "pcm/polar.hpp"
#include "pcm/util.hpp"

namespace pcm {

struct Candidate {
    std::vector<std::uint8_t> info;
    double metric = 0.0;
    bool crc_ok = false;
};

struct DynamicResult {
    std::vector<std::uint8_t> info;
    double metric = 0.0;
    bool crc_ok = false;
    unsigned list_size = 0;  // list size in force when the decision was made
};

class ListDecoder {
public:
    ListDecoder(CodeSpec spec, ChannelParams params, DecoderOptions opts = {})
        : spec_(std::move(spec)), params_(params), opts_(opts) {
        validate_code_spec(spec_);
        if (params_.levels() != spec_.m)
            throw std::invalid_argument("ListDecoder: M and level count disagree");
        stages_ = ilog2(spec_.n) + 1;  // stage 0 holds channel LLRs
    }

    std::vector<Candidate> decode(const std::vector<PhotonVector>& y, unsigned L) {
        prepare_tables(y);
        return run(L);
    }

    // L = 32, 64, ... until a candidate passes the CRC; on total failure the
    // best-metric candidate of the last attempt is returned flagged as such.
    DynamicResult decode_dynamic(const std::vector<PhotonVector>& y, unsigned L_max) {
        if (!spec_.crc)
            throw std::invalid_argument("decode_dynamic: schedule needs a CRC");
        if (L_max < 32 || !is_pow2(L_max))
            throw std::invalid_argument("decode_dynamic: L_max must be a power of two >= 32");
        prepare_tables(y);
        std::vector<Candidate> last;
        for (unsigned L = 32; L <= L_max; L <<= 1) {
            last = run(L);
            for (const Candidate& cand : last)
                if (cand.crc_ok)
                    return {cand.info, cand.metric, true, L};
        }
        return {last.front().info, last.front().metric, false, L_max};
    }

private:
    struct ChainNode {
        std::int32_t parent;
        std::uint32_t refs;
        std::uint8_t bit;
    };

    struct LevelState {
        std::shared_ptr<const LevelState> prev;
        std::vector<std::uint8_t> u;           // this level's decisions, decoder order
        std::vector<std::uint32_t> prefix;     // label bits decided so far, per symbol
    };

    void prepare_tables(const std::vector<PhotonVector>& y) {
        if (y.size() != spec_.n_used)
            throw std::invalid_argument("decode: expected one symbol per used position");
        if (params_.n_b > 0.0) {
            tables_.resize(spec_.n_used);
            for (unsigned i = 0; i < spec_.n_used; ++i)
                tables_[i].build(y[i], params_);
        } else {
            raw_ = y;  // erasure-branch fallback demaps on the fly
        }
    }

    double channel_llr(unsigned symbol, unsigned level, std::uint32_t prefix_val) const {
        if (params_.n_b > 0.0)
            return tables_[symbol].llr(level, prefix_val);
        Label prefix(level - 1);
        for (unsigned i = 0; i + 1 < level; ++i)
            prefix[i] = (prefix_val >> i) & 1u;
        return clamp_llr(demap_level(raw_[symbol], level, prefix, params_));
    }

    // ---- pool plumbing -------------------------------------------------

    void setup(unsigned L) {
        L_ = L;
        std::size_t bytes = 0;
        for (unsigned s = 0; s < stages_; ++s)
            bytes += static_cast<std::size_t>(L) * (spec_.n >> s) * (sizeof(double) + 2);
        if (bytes > (std::size_t{8} << 30))
            throw resource_error("list decoder: configuration needs more than 8 GiB");
        try {
            llr_data_.assign(stages_, {});
            c_data_.assign(stages_, {});
            llr_ref_.assign(stages_, {});
            c_ref_.assign(stages_, {});
            llr_free_.assign(stages_, {});
            c_free_.assign(stages_, {});
            llr_slot_.assign(stages_, {});
            c_slot_.assign(stages_, {});
            for (unsigned s = 0; s < stages_; ++s) {
                std::size_t width = spec_.n >> s;
                llr_data_[s].resize(static_cast<std::size_t>(L) * width);
                c_data_[s].resize(static_cast<std::size_t>(L) * 2 * width);
                llr_ref_[s].assign(L, 0);
                c_ref_[s].assign(L, 0);
                llr_slot_[s].assign(L, 0);
                c_slot_[s].assign(L, 0);
                llr_free_[s].clear();
                c_free_[s].clear();
                for (unsigned slot = L; slot-- > 0;) {
                    llr_free_[s].push_back(slot);
                    c_free_[s].push_back(slot);
                }
            }
        } catch (const std::bad_alloc&) {
            throw resource_error("list decoder: allocation failed");
        }
        active_.assign(L, 0);
        metric_.assign(L, 0.0);
        head_.assign(L, -1);
        hist_.assign(L, nullptr);
        free_paths_.clear();
        for (unsigned p = L; p-- > 0;)
            free_paths_.push_back(p);
        chain_.clear();
        chain_free_.clear();

        unsigned first = alloc_path();
        for (unsigned s = 0; s < stages_; ++s) {
            llr_slot_[s][first] = pop_free(llr_free_[s]);
            llr_ref_[s][llr_slot_[s][first]] = 1;
            c_slot_[s][first] = pop_free(c_free_[s]);
            c_ref_[s][c_slot_[s][first]] = 1;
        }
    }

    static std::uint32_t pop_free(std::vector<std::uint32_t>& stack) {
        std::uint32_t v = stack.back();
        stack.pop_back();
        return v;
    }

    unsigned alloc_path() {
        unsigned p = pop_free(free_paths_);
        active_[p] = 1;
        metric_[p] = 0.0;
        head_[p] = -1;
        hist_[p] = nullptr;
        return p;
    }

    const double* llr_read(unsigned s, unsigned p) const {
        return llr_data_[s].data() + static_cast<std::size_t>(llr_slot_[s][p]) * (spec_.n >> s);
    }

    // caller overwrites the whole array, so a shared slot detaches sans copy
    double* llr_write(unsigned s, unsigned p) {
        std::uint32_t slot = llr_slot_[s][p];
        if (llr_ref_[s][slot] > 1) {
            --llr_ref_[s][slot];
            slot = pop_free(llr_free_[s]);
            llr_ref_[s][slot] = 1;
            llr_slot_[s][p] = slot;
        }
        return llr_data_[s].data() + static_cast<std::size_t>(slot) * (spec_.n >> s);
    }

    const std::uint8_t* c_read(unsigned s, unsigned p) const {
        return c_data_[s].data() + static_cast<std::size_t>(c_slot_[s][p]) * 2 * (spec_.n >> s);
    }

    // partial-sum writes touch one parity only, detaching must copy
    std::uint8_t* c_write(unsigned s, unsigned p) {
        std::uint32_t slot = c_slot_[s][p];
        std::size_t width = 2 * (spec_.n >> s);
        if (c_ref_[s][slot] > 1) {
            --c_ref_[s][slot];
            std::uint32_t fresh = pop_free(c_free_[s]);
            c_ref_[s][fresh] = 1;
            c_slot_[s][p] = fresh;
            std::copy_n(c_data_[s].data() + static_cast<std::size_t>(slot) * width, width,
                        c_data_[s].data() + static_cast<std::size_t>(fresh) * width);
            slot = fresh;
        }
        return c_data_[s].data() + static_cast<std::size_t>(slot) * width;
    }

    void kill_path(unsigned p) {
        active_[p] = 0;
        release_chain(head_[p]);
        head_[p] = -1;
        hist_[p] = nullptr;
        for (unsigned s = 0; s < stages_; ++s) {
            if (--llr_ref_[s][llr_slot_[s][p]] == 0)
                llr_free_[s].push_back(llr_slot_[s][p]);
            if (--c_ref_[s][c_slot_[s][p]] == 0)
                c_free_[s].push_back(c_slot_[s][p]);
        }
        free_paths_.push_back(p);
    }

    unsigned clone_path(unsigned src) {
        unsigned p = alloc_path();
        metric_[p] = metric_[src];
        head_[p] = head_[src];
        if (head_[p] >= 0)
            ++chain_[head_[p]].refs;
        hist_[p] = hist_[src];
        for (unsigned s = 0; s < stages_; ++s) {
            llr_slot_[s][p] = llr_slot_[s][src];
            ++llr_ref_[s][llr_slot_[s][p]];
            c_slot_[s][p] = c_slot_[s][src];
            ++c_ref_[s][c_slot_[s][p]];
        }
        return p;
    }

    // ---- decision chain ------------------------------------------------

    void chain_append(unsigned p, std::uint8_t bit) {
        std::int32_t node;
        if (!chain_free_.empty()) {
            node = chain_free_.back();
            chain_free_.pop_back();
        } else {
            node = static_cast<std::int32_t>(chain_.size());
            chain_.push_back({});
        }
        chain_[node] = {head_[p], 1, bit};
        head_[p] = node;
    }

    void release_chain(std::int32_t node) {
        while (node >= 0) {
            if (--chain_[node].refs > 0)
                break;
            chain_free_.push_back(node);
            node = chain_[node].parent;
        }
    }

    // ---- SC recursion --------------------------------------------------

    void calc_llr(unsigned s, unsigned phi, unsigned p) {
        if (s == 0)
            return;
        if ((phi & 1u) == 0)
            calc_llr(s - 1, phi >> 1, p);
        std::size_t width = spec_.n >> s;
        const double* src = llr_read(s - 1, p);
        if ((phi & 1u) == 0) {
            double* dst = llr_write(s, p);
            for (std::size_t i = 0; i < width; ++i)
                dst[i] = detail::f_node(src[2 * i], src[2 * i + 1], opts_.min_sum);
        } else {
            const std::uint8_t* cs = c_read(s, p);
            double* dst = llr_write(s, p);
            for (std::size_t i = 0; i < width; ++i)
                dst[i] = detail::g_node(src[2 * i], src[2 * i + 1], cs[2 * i]);
        }
    }

    void update_c(unsigned s, unsigned phi, unsigned p) {
        unsigned psi = phi >> 1;
        std::size_t width = spec_.n >> s;
        const std::uint8_t* src = c_read(s, p);
        std::uint8_t* dst = c_write(s - 1, p);
        for (std::size_t i = 0; i < width; ++i) {
            dst[2 * (2 * i) + (psi & 1u)] = src[2 * i] ^ src[2 * i + 1];
            dst[2 * (2 * i + 1) + (psi & 1u)] = src[2 * i + 1];
        }
        if (psi & 1u)
            update_c(s - 1, psi, p);
    }

    // ---- level plumbing ------------------------------------------------

    void init_level(unsigned level) {
        for (unsigned p = 0; p < L_; ++p) {
            if (!active_[p])
                continue;
            double* dst = llr_write(0, p);
            const std::uint32_t* prefix = hist_[p] ? hist_[p]->prefix.data() : nullptr;
            for (unsigned i = 0; i < spec_.n_used; ++i)
                dst[i] = channel_llr(i, level, prefix ? prefix[i] : 0u);
            for (unsigned i = spec_.n_used; i < spec_.n; ++i)
                dst[i] = llr_cap;  // shortened symbols carry a known zero bit
        }
    }

    void commit_level(unsigned level) {
        for (unsigned p = 0; p < L_; ++p) {
            if (!active_[p])
                continue;
            auto state = std::make_shared<LevelState>();
            state->prev = hist_[p];
            state->u.resize(spec_.n);
            std::int32_t node = head_[p];
            for (unsigned i = spec_.n; i-- > 0;) {
                state->u[i] = chain_[node].bit;
                node = chain_[node].parent;
            }
            auto c = level_codeword(state->u);
            if (state->prev)
                state->prefix = state->prev->prefix;
            else
                state->prefix.assign(spec_.n_used, 0);
            for (unsigned i = 0; i < spec_.n_used; ++i)
                state->prefix[i] |= static_cast<std::uint32_t>(c[i]) << (level - 1);
            release_chain(head_[p]);
            head_[p] = -1;
            hist_[p] = std::move(state);
        }
    }

    struct Fork {
        double metric;
        std::uint32_t path;
        std::uint8_t rank;  // 0 when `bit` is the sign-rule choice
        std::uint8_t bit;
    };

    // Ties between a path's own forks go to the sign-rule bit: the penalty
    // gap softplus(-l) - softplus(l) equals -l exactly, but the rounded sums
    // can collide when |l| shrinks below one ulp of the running metric, and
    // the single-path decoder must stay identical to plain SC.
    static bool fork_less(const Fork& a, const Fork& b) {
        if (a.metric != b.metric)
            return a.metric < b.metric;
        if (a.path != b.path)
            return a.path < b.path;
        return a.rank < b.rank;
    }

    void decide_frozen(unsigned phi) {
        for (unsigned p = 0; p < L_; ++p) {
            if (!active_[p])
                continue;
            double l = llr_read(stages_ - 1, p)[0];
            metric_[p] += detail::metric_penalty(l, 0, opts_.approx_metric);
            c_write(stages_ - 1, p)[phi & 1u] = 0;
            chain_append(p, 0);
        }
    }

    void decide_info(unsigned phi) {
        forks_.clear();
        for (unsigned p = 0; p < L_; ++p) {
            if (!active_[p])
                continue;
            double l = llr_read(stages_ - 1, p)[0];
            std::uint8_t sign_bit = l < 0.0 ? 1 : 0;
            forks_.push_back(
                {metric_[p] + detail::metric_penalty(l, 0, opts_.approx_metric), p, sign_bit, 0});
            forks_.push_back(
                {metric_[p] + detail::metric_penalty(l, 1, opts_.approx_metric), p,
                 static_cast<std::uint8_t>(1 - sign_bit), 1});
        }
        if (forks_.size() > L_) {
            std::nth_element(forks_.begin(), forks_.begin() + L_, forks_.end(), fork_less);
            forks_.resize(L_);
        }
        keep_.assign(2 * static_cast<std::size_t>(L_), 0);
        for (const Fork& f : forks_)
            keep_[2 * f.path + f.bit] = 1;
        survivors_.clear();
        for (unsigned p = 0; p < L_; ++p) {
            if (!active_[p])
                continue;
            if (!keep_[2 * p] && !keep_[2 * p + 1])
                kill_path(p);
            else
                survivors_.push_back(p);
        }
        for (unsigned p : survivors_) {
            double l = llr_read(stages_ - 1, p)[0];
            double pen0 = detail::metric_penalty(l, 0, opts_.approx_metric);
            double pen1 = detail::metric_penalty(l, 1, opts_.approx_metric);
            if (keep_[2 * p] && keep_[2 * p + 1]) {
                unsigned q = clone_path(p);
                metric_[p] += pen0;
                c_write(stages_ - 1, p)[phi & 1u] = 0;
                chain_append(p, 0);
                metric_[q] += pen1;
                c_write(stages_ - 1, q)[phi & 1u] = 1;
                chain_append(q, 1);
            } else {
                std::uint8_t bit = keep_[2 * p + 1] ? 1 : 0;
                metric_[p] += bit ? pen1 : pen0;
                c_write(stages_ - 1, p)[phi & 1u] = bit;
                chain_append(p, bit);
            }
        }
    }

    std::vector<Candidate> finalize() {
        std::vector<std::pair<Candidate, unsigned>> ranked;
        for (unsigned p = 0; p < L_; ++p) {
            if (!active_[p])
                continue;
            std::vector<const LevelState*> states(spec_.m);
            const LevelState* s = hist_[p].get();
            for (unsigned level = spec_.m; level-- > 0;) {
                states[level] = s;
                s = s->prev.get();
            }
            std::vector<std::uint8_t> payload;
            payload.reserve(spec_.k_total());
            for (std::size_t idx = 0; idx < spec_.frozen.size(); ++idx)
                if (!spec_.frozen[idx])
                    payload.push_back(states[idx / spec_.n]->u[idx % spec_.n]);
            Candidate cand;
            cand.metric = metric_[p];
            cand.crc_ok = spec_.crc ? crc_check(payload, *spec_.crc) : true;
            payload.resize(spec_.k_info);
            cand.info = std::move(payload);
            ranked.emplace_back(std::move(cand), p);
        }
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first.metric != b.first.metric)
                return a.first.metric < b.first.metric;
            return a.second < b.second;
        });
        std::vector<Candidate> out;
        out.reserve(ranked.size());
        for (auto& r : ranked)
            out.push_back(std::move(r.first));
        return out;
    }

    std::vector<Candidate> run(unsigned L) {
        if (L < 1)
            throw std::invalid_argument("scl_decode: list size must be positive");
        setup(L);
        for (unsigned level = 1; level <= spec_.m; ++level) {
            init_level(level);
            for (unsigned phi = 0; phi < spec_.n; ++phi) {
                for (unsigned p = 0; p < L_; ++p)
                    if (active_[p])
                        calc_llr(stages_ - 1, phi, p);
                std::size_t idx = static_cast<std::size_t>(level - 1) * spec_.n + phi;
                if (spec_.frozen[idx])
                    decide_frozen(phi);
                else
                    decide_info(phi);
                if (phi & 1u)
                    for (unsigned p = 0; p < L_; ++p)
                        if (active_[p])
                            update_c(stages_ - 1, phi, p);
            }
            commit_level(level);
        }
        return finalize();
    }

    CodeSpec spec_;
    ChannelParams params_;
    DecoderOptions opts_;
    unsigned stages_ = 0;
    unsigned L_ = 0;

    std::vector<DemapTable> tables_;
    std::vector<PhotonVector> raw_;

    std::vector<std::vector<double>> llr_data_;
    std::vector<std::vector<std::uint8_t>> c_data_;
    std::vector<std::vector<std::uint32_t>> llr_ref_, c_ref_;
    std::vector<std::vector<std::uint32_t>> llr_free_, c_free_;
    std::vector<std::vector<std::uint32_t>> llr_slot_, c_slot_;

    std::vector<std::uint8_t> active_;
    std::vector<double> metric_;
    std::vector<std::int32_t> head_;
    std::vector<std::shared_ptr<const LevelState>> hist_;
    std::vector<std::uint32_t> free_paths_;

    std::vector<ChainNode> chain_;
    std::vector<std::int32_t> chain_free_;

    std::vector<Fork> forks_;
    std::vector<std::uint8_t> keep_;
    std::vector<unsigned> survivors_;
};

inline std::vector<Candidate> scl_decode(const std::vector<PhotonVector>& y,
                                         const CodeSpec& spec, const ChannelParams& params,
                                         unsigned L, DecoderOptions opts = {}) {
    return ListDecoder(spec, params, opts).decode(y, L);
}

inline DynamicResult dynamic_list_decode(const std::vector<PhotonVector>& y,
                                         const CodeSpec& spec, const ChannelParams& params,
                                         unsigned L_max, DecoderOptions opts = {}) {
    return ListDecoder(spec, params, opts).decode_dynamic(y, L_max);
}

}  // namespace pcm
