#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "risnoma/channel_model.hpp"
#include "risnoma/constellation.hpp"
#include "risnoma/rng.hpp"
#include "risnoma/system_config.hpp"

namespace risnoma {

// noma: all users superimposed, surface split into per-user partitions.
// oma1: each user alone in its slot with every reflector steered for them.
// oma2: each user alone, but only their own partition steered for them; the
//       other partitions keep their owners' phases and leak in unaligned.
// Both orthogonal modes rate-match by raising the per-slot modulation to
// M^K, so every user moves the same bits per channel use in every mode.
enum class McMode { noma, oma1, oma2 };

struct McOptions {
    std::uint64_t seed{1};
    std::uint64_t max_runs{100000};
    std::uint64_t block_runs{4096};
    // Blocks are tallied in index order until every user has this many bit
    // errors; 0 disables the stop and all max_runs runs are tallied.
    std::uint64_t target_errors{200};
    int threads{0};  // <= 0 picks hardware concurrency
};

struct McResult {
    std::uint64_t runs{0};       // runs whose detections were tallied
    std::uint64_t discarded{0};  // draws dropped before detection
    std::vector<std::uint64_t> bit_errors;
    std::vector<double> ber;
    std::vector<double> ber_stderr;
};

namespace detail {

struct McContext {
    SystemConfig cfg;
    ChannelStats st;
    std::vector<int> m_half;        // per-user one-dimension level count
    std::vector<int> oma_m_half;    // same for the rate-matched M^K grid
    std::vector<int> oma_bits;      // bits per run and user in the oma modes
    std::vector<double> oma_scale;  // sqrt(P eta / beta(M^K))
    double sigma_n{1.0};
};

inline McContext make_mc_context(const SystemConfig& cfg) {
    McContext ctx;
    ctx.cfg = cfg;
    ctx.st = channel_stats(cfg);
    ctx.sigma_n = std::sqrt(cfg.sigma_n2);
    const auto K = static_cast<std::size_t>(cfg.K);
    for (std::size_t i = 0; i < K; ++i) {
        ctx.m_half.push_back(1 << (cfg.bits[i] / 2));
        const int ob = cfg.bits[i] * cfg.K;
        ctx.oma_bits.push_back(ob);
        ctx.oma_m_half.push_back(1 << (ob / 2));
        const double beta = qam_scale(std::int64_t{1} << ob);
        ctx.oma_scale.push_back(std::sqrt(ctx.st.P_linear[i] * ctx.st.eta[i] / beta));
    }
    return ctx;
}

struct BlockTally {
    std::uint64_t used{0};
    std::uint64_t discarded{0};
    std::vector<std::uint64_t> errors;
    std::vector<std::uint64_t> errors_sq;
};

// One slot of one user on a plain square grid: weight w per unit amplitude,
// m levels per dimension. Returns the bit error count across both dimensions.
inline int oma_slot(double w, int m, double sigma_n, Rng& rng) {
    int idx[2];
    double y[2];
    for (int d = 0; d < 2; ++d) {
        idx[d] = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
        y[d] = w * (2 * idx[d] - (m - 1));
    }
    for (int d = 0; d < 2; ++d) y[d] += sigma_n * rng.gaussian();
    int errs = 0;
    for (int d = 0; d < 2; ++d) {
        // Threshold grid is uniform: cell index from direct quantization,
        // with exact threshold hits going to the lower cell.
        double u = (y[d] / w + (m - 1)) / 2.0;
        int det = static_cast<int>(std::floor(u + 0.5));
        if (u + 0.5 == std::floor(u + 0.5)) --det;  // on a threshold
        det = std::max(0, std::min(m - 1, det));
        errs += std::popcount(static_cast<unsigned>(gray_encode(idx[d]) ^ gray_encode(det)));
    }
    return errs;
}

inline void run_mc_block(const McContext& ctx, McMode mode, ChannelSampler& sampler, Rng rng,
                         std::uint64_t runs, BlockTally& out) {
    const auto K = static_cast<std::size_t>(ctx.cfg.K);
    out.used = 0;
    out.discarded = 0;
    out.errors.assign(K, 0);
    out.errors_sq.assign(K, 0);
    GammaMatrix gamma;
    AmpMatrix amp;
    std::vector<double> h(K);
    std::vector<int> idx(2 * K);
    std::vector<std::uint64_t> e(K);
    for (std::uint64_t r = 0; r < runs; ++r) {
        if (mode == McMode::noma) {
            sampler.sample(rng, gamma);
            ConstellationSpec spec;
            try {
                h = exact_h_eff(gamma, align_channels(gamma));
                spec = build_superimposed(ctx.cfg.bits, h);
            } catch (const AlignmentError&) {
                ++out.discarded;
                continue;
            } catch (const DegenerateConstellationError&) {
                ++out.discarded;
                continue;
            }
            double y[2] = {0.0, 0.0};
            for (int d = 0; d < 2; ++d)
                for (std::size_t i = 0; i < K; ++i) {
                    const int m = ctx.m_half[i];
                    const int ix = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
                    idx[static_cast<std::size_t>(d) * K + i] = ix;
                    y[d] += h[i] * (2 * ix - (m - 1));
                }
            for (int d = 0; d < 2; ++d) y[d] += ctx.sigma_n * rng.gaussian();
            for (std::size_t i = 0; i < K; ++i) e[i] = 0;
            for (int d = 0; d < 2; ++d) {
                const int det = detect_level(spec, y[d]);
                const auto& sub = spec.levels[static_cast<std::size_t>(det)].sub;
                for (std::size_t i = 0; i < K; ++i) {
                    const unsigned sent = static_cast<unsigned>(
                        gray_encode(idx[static_cast<std::size_t>(d) * K + i]));
                    e[i] += static_cast<std::uint64_t>(
                        std::popcount(sent ^ static_cast<unsigned>(sub[i])));
                }
            }
            ++out.used;
            for (std::size_t i = 0; i < K; ++i) {
                out.errors[i] += e[i];
                out.errors_sq[i] += e[i] * e[i];
            }
        } else {
            sampler.sample(rng, gamma, &amp);
            ++out.used;
            for (std::size_t i = 0; i < K; ++i) {
                double gain;
                if (mode == McMode::oma1) {
                    gain = 0.0;
                    for (std::size_t j = 0; j < K; ++j) gain += amp[i][j];
                } else {
                    std::complex<double> c(amp[i][i], 0.0);
                    for (std::size_t j = 0; j < K; ++j)
                        if (j != i) c += gamma[i][j] / ctx.st.scale[i];
                    gain = std::abs(c);
                }
                const int errs =
                    oma_slot(ctx.oma_scale[i] * gain, ctx.oma_m_half[i], ctx.sigma_n, rng);
                out.errors[i] += static_cast<std::uint64_t>(errs);
                out.errors_sq[i] += static_cast<std::uint64_t>(errs) *
                                    static_cast<std::uint64_t>(errs);
            }
        }
    }
}

}  // namespace detail

// Fixed-seed link simulation. Work is split into blocks with independently
// derived generators; blocks are tallied strictly in index order and the
// early stop cuts at a block boundary, so the result is a pure function of
// (config, options, mode) regardless of thread count or scheduling.
inline McResult simulate_links(const SystemConfig& cfg, const McOptions& opt, McMode mode) {
    if (opt.block_runs == 0) throw std::invalid_argument("mc: block_runs must be positive");
    if (opt.max_runs == 0) throw std::invalid_argument("mc: max_runs must be positive");
    const detail::McContext ctx = detail::make_mc_context(cfg);
    const auto K = static_cast<std::size_t>(cfg.K);
    const std::uint64_t n_blocks = (opt.max_runs + opt.block_runs - 1) / opt.block_runs;

    std::vector<detail::BlockTally> tallies(n_blocks);
    const std::unique_ptr<std::atomic<std::uint8_t>[]> done(
        new std::atomic<std::uint8_t>[n_blocks]);
    for (std::uint64_t b = 0; b < n_blocks; ++b) done[b].store(0, std::memory_order_relaxed);
    std::atomic<std::uint64_t> next{0};
    std::atomic<std::uint64_t> stop{n_blocks};
    std::mutex scan_lock;
    std::uint64_t scanned = 0;
    std::vector<std::uint64_t> cum(K, 0);

    const auto worker = [&] {
        ChannelSampler sampler(cfg.L, ctx.st.scale);
        for (;;) {
            const std::uint64_t b = next.fetch_add(1);
            if (b >= n_blocks || b >= stop.load(std::memory_order_acquire)) return;
            const std::uint64_t lo = b * opt.block_runs;
            const std::uint64_t hi = std::min(lo + opt.block_runs, opt.max_runs);
            detail::run_mc_block(ctx, mode, sampler, Rng::derive(opt.seed, b), hi - lo,
                                 tallies[b]);
            done[b].store(1, std::memory_order_release);
            if (opt.target_errors == 0) continue;
            std::lock_guard<std::mutex> g(scan_lock);
            while (scanned < stop.load(std::memory_order_acquire) && scanned < n_blocks &&
                   done[scanned].load(std::memory_order_acquire)) {
                for (std::size_t i = 0; i < K; ++i) cum[i] += tallies[scanned].errors[i];
                ++scanned;
                bool enough = true;
                for (std::size_t i = 0; i < K; ++i)
                    if (cum[i] < opt.target_errors) enough = false;
                if (enough) {
                    stop.store(scanned, std::memory_order_release);
                    break;
                }
            }
        }
    };

    int n_threads = opt.threads > 0 ? opt.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
    n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(n_blocks)));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads - 1));
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    const std::uint64_t last = std::min<std::uint64_t>(stop.load(), n_blocks);
    McResult res;
    res.bit_errors.assign(K, 0);
    res.ber.assign(K, 0.0);
    res.ber_stderr.assign(K, 0.0);
    std::vector<std::uint64_t> esq(K, 0);
    for (std::uint64_t b = 0; b < last; ++b) {
        res.runs += tallies[b].used;
        res.discarded += tallies[b].discarded;
        for (std::size_t i = 0; i < K; ++i) {
            res.bit_errors[i] += tallies[b].errors[i];
            esq[i] += tallies[b].errors_sq[i];
        }
    }
    if (res.runs == 0) return res;
    const double n = static_cast<double>(res.runs);
    for (std::size_t i = 0; i < K; ++i) {
        const double bits_per_run =
            mode == McMode::noma ? ctx.cfg.bits[i] : ctx.oma_bits[i];
        const double mean_e = static_cast<double>(res.bit_errors[i]) / n;
        res.ber[i] = mean_e / bits_per_run;
        if (res.runs > 1) {
            const double var_e =
                (static_cast<double>(esq[i]) - n * mean_e * mean_e) / (n - 1.0);
            res.ber_stderr[i] = std::sqrt(std::max(0.0, var_e) / n) / bits_per_run;
        }
    }
    return res;
}

}  // namespace risnoma
