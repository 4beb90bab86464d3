// Copyright 2026-present the cloudann project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cloudann {

// Analytic single-query cost model parameters. I/O terms come from the
// storage profile; the two compute coefficients are either configured or
// fitted from measured runs.
struct EnvParams {
    double ttfb = 0.031;                   // seconds
    double bandwidth_bytes_per_sec = 625e6;
    double get_rate_limit = 20000.0;
    double c_dist_coeff = 1e-9;            // seconds per (dimension x comparison)
    double c_centroid_coeff = 50e-9;       // seconds per centroid-tree visit

    // The BKT term's form: nprobe*log2(n) by default; the literal reading
    // of the scaling claim (n*log2(nprobe)) is kept as an option.
    enum class CentroidTermForm { nprobe_log_n, n_log_nprobe };
    CentroidTermForm centroid_term_form = CentroidTermForm::nprobe_log_n;

    void
    check() const {
        if (ttfb <= 0 || bandwidth_bytes_per_sec <= 0 || get_rate_limit <= 0 ||
            c_dist_coeff < 0 || c_centroid_coeff < 0) {
            throw std::invalid_argument("env params must be positive");
        }
    }
};

struct ClusterCostInputs {
    std::uint32_t n = 0;        // centroid count
    std::uint32_t nprobe = 0;
    std::uint64_t records = 0;  // vectors fetched (l)
    std::uint64_t bytes_fetched = 0;
    std::uint32_t dim = 0;
};

struct GraphCostInputs {
    double roundtrips = 0;        // rt (mean over queries is fine)
    std::uint32_t degree = 0;     // K: per-round neighbor comparisons
    double bytes_per_round = 0;
    std::uint32_t dim = 0;
};

struct CostBreakdown {
    double total = 0;
    double centroid_term = 0;  // cluster only
    double fetch_term = 0;
    double dist_term = 0;
    double roundtrip_floor = 0;  // graph only: rt x TTFB
};

// Cluster search cost: centroid selection + one parallel fetch wave (TTFB
// charged once, bytes serialized through the pipe) + per-record distances.
inline CostBreakdown
cluster_cost(const EnvParams& env, const ClusterCostInputs& in) {
    env.check();
    if (in.nprobe > in.n) {
        throw std::invalid_argument("cluster cost: nprobe exceeds n");
    }
    CostBreakdown out;
    if (in.nprobe > 0) {
        double term = env.centroid_term_form == EnvParams::CentroidTermForm::nprobe_log_n
                          ? static_cast<double>(in.nprobe) *
                                std::log2(std::max<double>(in.n, 2.0))
                          : static_cast<double>(in.n) *
                                std::log2(std::max<double>(in.nprobe, 2.0));
        out.centroid_term = env.c_centroid_coeff * term;
    }
    if (in.bytes_fetched > 0) {
        out.fetch_term = env.ttfb + static_cast<double>(in.bytes_fetched) /
                                        env.bandwidth_bytes_per_sec;
    }
    out.dist_term = env.c_dist_coeff * static_cast<double>(in.records) * in.dim;
    out.total = out.centroid_term + out.fetch_term + out.dist_term;
    return out;
}

// Graph search cost: rt sequential rounds of TTFB + per-round fetch +
// per-round distance computations; rt x TTFB is the irreducible floor.
inline CostBreakdown
graph_cost(const EnvParams& env, const GraphCostInputs& in) {
    env.check();
    if (in.roundtrips < 0) {
        throw std::invalid_argument("graph cost: negative roundtrips");
    }
    CostBreakdown out;
    double per_round_fetch = in.bytes_per_round / env.bandwidth_bytes_per_sec;
    double per_round_dist = env.c_dist_coeff * static_cast<double>(in.degree) * in.dim;
    out.roundtrip_floor = in.roundtrips * env.ttfb;
    out.fetch_term = in.roundtrips * per_round_fetch;
    out.dist_term = in.roundtrips * per_round_dist;
    out.total = out.roundtrip_floor + out.fetch_term + out.dist_term;
    return out;
}

enum class IndexFamily { cluster, graph };

struct CalibrationPoint {
    IndexFamily family;
    ClusterCostInputs cluster;  // valid when family == cluster
    GraphCostInputs graph;      // valid when family == graph
    double measured_seconds = 0;
};

struct CalibrationReport {
    double c_dist_coeff = 0;
    double c_centroid_coeff = 0;
    double max_rel_error = 0;   // of the refit predictions vs measurements
    std::vector<double> residuals;
};

// Least-squares fit of the two compute coefficients with the I/O terms held
// at their configured values. Needs at least three points per present
// family; throws on a rank-deficient system.
inline CalibrationReport
calibrate(const EnvParams& env, const std::vector<CalibrationPoint>& points) {
    std::size_t cluster_pts = 0, graph_pts = 0;
    for (const auto& p : points) {
        (p.family == IndexFamily::cluster ? cluster_pts : graph_pts) += 1;
    }
    if ((cluster_pts > 0 && cluster_pts < 3) || (graph_pts > 0 && graph_pts < 3) ||
        points.empty()) {
        throw std::invalid_argument("calibrate: need >= 3 measured points per index family");
    }

    // Rows: y - io = a*x1 + b*x2 with a = c_centroid_coeff, b = c_dist_coeff.
    double s11 = 0, s12 = 0, s22 = 0, sy1 = 0, sy2 = 0;
    std::vector<std::pair<double, double>> xs;
    for (const auto& p : points) {
        double x1 = 0, x2 = 0, io = 0;
        if (p.family == IndexFamily::cluster) {
            const auto& in = p.cluster;
            x1 = env.centroid_term_form == EnvParams::CentroidTermForm::nprobe_log_n
                     ? static_cast<double>(in.nprobe) * std::log2(std::max<double>(in.n, 2.0))
                     : static_cast<double>(in.n) * std::log2(std::max<double>(in.nprobe, 2.0));
            x2 = static_cast<double>(in.records) * in.dim;
            io = in.bytes_fetched > 0 ? env.ttfb + static_cast<double>(in.bytes_fetched) /
                                                       env.bandwidth_bytes_per_sec
                                      : 0.0;
        } else {
            const auto& in = p.graph;
            x2 = in.roundtrips * static_cast<double>(in.degree) * in.dim;
            io = in.roundtrips * (env.ttfb + in.bytes_per_round / env.bandwidth_bytes_per_sec);
        }
        double y = p.measured_seconds - io;
        xs.emplace_back(x1, x2);
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        sy1 += x1 * y;
        sy2 += x2 * y;
    }

    bool identical = true;
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (xs[i] != xs[0]) {
            identical = false;
            break;
        }
    }
    if (identical) {
        throw std::invalid_argument("calibrate: rank-deficient fit (identical points)");
    }

    CalibrationReport rep;
    double det = s11 * s22 - s12 * s12;
    if (s22 == 0.0) {
        throw std::invalid_argument("calibrate: rank-deficient fit (no distance signal)");
    }
    if (s11 == 0.0) {
        // No centroid term present (graph-only fit): one unknown.
        rep.c_centroid_coeff = env.c_centroid_coeff;
        rep.c_dist_coeff = sy2 / s22;
    } else if (std::abs(det) < 1e-9 * s11 * s22) {
        // Collinear columns (records scale exactly with nprobe): the two
        // coefficients cannot be separated, so the centroid coefficient
        // keeps its configured value and the distance term absorbs the rest.
        rep.c_centroid_coeff = env.c_centroid_coeff;
        double sy2_adj = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            (void)i;
        }
        sy2_adj = sy2 - env.c_centroid_coeff * s12;
        rep.c_dist_coeff = sy2_adj / s22;
    } else {
        rep.c_centroid_coeff = (sy1 * s22 - sy2 * s12) / det;
        rep.c_dist_coeff = (s11 * sy2 - s12 * sy1) / det;
    }
    rep.c_dist_coeff = std::max(rep.c_dist_coeff, 0.0);
    rep.c_centroid_coeff = std::max(rep.c_centroid_coeff, 0.0);

    EnvParams fitted = env;
    fitted.c_dist_coeff = rep.c_dist_coeff;
    fitted.c_centroid_coeff = rep.c_centroid_coeff;
    for (const auto& p : points) {
        double pred = p.family == IndexFamily::cluster ? cluster_cost(fitted, p.cluster).total
                                                       : graph_cost(fitted, p.graph).total;
        double rel = std::abs(pred - p.measured_seconds) /
                     std::max(std::abs(p.measured_seconds), 1e-12);
        rep.residuals.push_back(pred - p.measured_seconds);
        rep.max_rel_error = std::max(rep.max_rel_error, rel);
    }
    return rep;
}

struct WorkloadTraits {
    double target_recall = 0.9;
    std::uint32_t concurrency = 1;
    std::uint32_t dim = 128;
    bool int8_data = false;
};

struct AdvisorConfig {
    double recall_cutoff = 0.8;         // graph favored at/above, with high concurrency
    std::uint32_t concurrency_cutoff = 16;
    std::uint32_t low_dim_threshold = 128;  // low-dim data shifts toward cluster
    double low_dim_recall_bump = 0.1;
    double int8_recall_bump = 0.05;
    double high_recall = 0.95;          // centroid tier switch
};

struct Recommendation {
    IndexFamily family = IndexFamily::cluster;
    double centroid_pct = 16.0;
    std::uint32_t num_replica = 8;
    std::uint32_t max_degree = 64;
    std::uint32_t beam_width = 16;
    bool iops_capped = false;  // the GET-rate limit bounded the beam width
};

// Rule-based tuning advisor. Graph indexes win at high recall and/or high
// concurrency; low-dimension or int8 data raises the bar in the cluster
// index's favor. Beam width is the largest tier whose predicted GET rate
// (concurrency x W requests per TTFB-long round) stays under the limit.
inline Recommendation
advise(const EnvParams& env, const WorkloadTraits& w, const AdvisorConfig& cfg = {}) {
    Recommendation rec;
    double cutoff = cfg.recall_cutoff;
    if (w.dim < cfg.low_dim_threshold) {
        cutoff += cfg.low_dim_recall_bump;
    }
    if (w.int8_data) {
        cutoff += cfg.int8_recall_bump;
    }
    bool graph = w.concurrency >= cfg.concurrency_cutoff && w.target_recall >= cutoff;
    rec.family = graph ? IndexFamily::graph : IndexFamily::cluster;

    bool pressured = w.target_recall >= cfg.high_recall || w.concurrency >= cfg.concurrency_cutoff;
    rec.centroid_pct = pressured ? 32.0 : 16.0;
    rec.num_replica = 8;
    rec.max_degree = pressured ? 256 : 64;

    std::uint32_t w_max = w.target_recall >= cfg.high_recall ? 64 : 16;
    std::uint32_t chosen = 4;
    for (std::uint32_t cand = 4; cand <= w_max; cand *= 2) {
        double predicted_get_rate = static_cast<double>(w.concurrency) * cand / env.ttfb;
        if (predicted_get_rate < env.get_rate_limit) {
            chosen = cand;
        } else {
            rec.iops_capped = true;
            break;
        }
    }
    rec.beam_width = chosen;
    return rec;
}

}  // namespace cloudann
