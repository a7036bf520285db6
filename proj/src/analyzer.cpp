#include "mobiface/analyzer.hpp"

#include <stdexcept>

namespace mobiface {

namespace {

long long elements(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) n *= d;
    return n;
}

long long layer_learnable(const LayerSpec& l) {
    const long long k2 = static_cast<long long>(l.kernel) * l.kernel;
    switch (l.kind) {
        case LayerKind::Conv:
            return k2 * l.in_channels * l.out_channels;
        case LayerKind::DWConv:
            return k2 * l.out_channels;
        case LayerKind::BatchNorm:
            return 2ll * l.out_channels;  // gamma, beta
        case LayerKind::PReLU:
            return l.out_channels;
        case LayerKind::FC:
            return static_cast<long long>(l.in_dim) * l.out_dim + l.out_dim;
        default:
            return 0;
    }
}

long long layer_buffers(const LayerSpec& l) {
    return l.kind == LayerKind::BatchNorm ? 2ll * l.out_channels : 0;  // running mean, var
}

long long layer_macs(const LayerSpec& l, const std::vector<int>& out_shape) {
    const long long k2 = static_cast<long long>(l.kernel) * l.kernel;
    switch (l.kind) {
        case LayerKind::Conv:
            return static_cast<long long>(out_shape[1]) * out_shape[2] * k2 * l.in_channels *
                   l.out_channels;
        case LayerKind::DWConv:
            return static_cast<long long>(out_shape[1]) * out_shape[2] * k2 * l.out_channels;
        case LayerKind::BatchNorm:
        case LayerKind::PReLU:
        case LayerKind::ReLU:
            return elements(out_shape);
        case LayerKind::FC:
            return static_cast<long long>(l.in_dim) * l.out_dim;
        default:
            return 0;  // flatten and shortcut markers
    }
}

}  // namespace

std::vector<ParamRow> count_params(const NetworkSpec& net) {
    std::vector<ParamRow> rows;
    rows.reserve(net.layers.size());
    for (const LayerSpec& l : net.layers) {
        rows.push_back({l.name, layer_learnable(l), layer_buffers(l)});
    }
    return rows;
}

std::vector<MacRow> count_macs(const NetworkSpec& net) {
    const auto trace = shape_trace(net);
    std::vector<MacRow> rows;
    rows.reserve(net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        rows.push_back({net.layers[i].name, layer_macs(net.layers[i], trace[i].second)});
    }
    return rows;
}

std::vector<ActRow> activation_memory(const NetworkSpec& net) {
    const auto trace = shape_trace(net);
    std::vector<ActRow> rows;
    rows.reserve(trace.size());
    for (const auto& [name, shape] : trace) {
        rows.push_back({name, 4 * elements(shape)});
    }
    return rows;
}

long long total_learnable(const std::vector<ParamRow>& rows) {
    long long n = 0;
    for (const ParamRow& r : rows) n += r.learnable;
    return n;
}

long long total_buffers(const std::vector<ParamRow>& rows) {
    long long n = 0;
    for (const ParamRow& r : rows) n += r.buffers;
    return n;
}

long long total_macs(const std::vector<MacRow>& rows) {
    long long n = 0;
    for (const MacRow& r : rows) n += r.macs;
    return n;
}

std::pair<long long, std::string> peak_activation(const NetworkSpec& net) {
    const auto trace = shape_trace(net);
    long long peak = 0;
    std::string peak_layer;
    std::vector<int> in_shape = net.input_shape;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const long long pair_bytes = 4 * (elements(in_shape) + elements(trace[i].second));
        if (pair_bytes > peak) {
            peak = pair_bytes;
            peak_layer = trace[i].first;
        }
        in_shape = trace[i].second;
    }
    return {peak, peak_layer};
}

DownsamplingReport downsampling_report(const NetworkSpec& net, int target_spatial) {
    if (target_spatial < 1) {
        throw std::invalid_argument("downsampling target must be >= 1");
    }
    const auto trace = shape_trace(net);

    DownsamplingReport report;
    report.target_spatial = target_spatial;

    std::vector<int> in_shape = net.input_shape;
    bool reached_target = false;
    report.none_at_or_below_target = true;
    report.tail_at_target = false;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const std::vector<int>& out_shape = trace[i].second;
        if (in_shape.size() == 3 && out_shape.size() == 3 &&
            (out_shape[1] < in_shape[1] || out_shape[2] < in_shape[2])) {
            report.events.push_back(
                {trace[i].first, in_shape[1], in_shape[2], out_shape[1], out_shape[2]});
            if (in_shape[1] <= target_spatial || in_shape[2] <= target_spatial) {
                report.none_at_or_below_target = false;
            }
        }
        if (out_shape.size() == 3) {
            if (!reached_target && out_shape[1] == target_spatial &&
                out_shape[2] == target_spatial) {
                reached_target = true;
                report.tail_at_target = true;
            } else if (reached_target &&
                       (out_shape[1] != target_spatial || out_shape[2] != target_spatial)) {
                report.tail_at_target = false;
            }
        }
        in_shape = out_shape;
    }

    // The events must chain the input extent down to the target by halving.
    report.halves_to_target = !report.events.empty();
    int expect_h = net.input_shape[1], expect_w = net.input_shape[2];
    for (const DownsampleEvent& e : report.events) {
        if (e.in_h != expect_h || e.in_w != expect_w || e.out_h * 2 != e.in_h ||
            e.out_w * 2 != e.in_w) {
            report.halves_to_target = false;
        }
        expect_h = e.out_h;
        expect_w = e.out_w;
    }
    if (expect_h != target_spatial || expect_w != target_spatial) {
        report.halves_to_target = false;
    }
    return report;
}

ArchReport analyze(const Arch& arch) {
    const NetworkSpec& net = arch.net;
    const auto trace = shape_trace(net);
    const auto params = count_params(net);
    const auto macs = count_macs(net);

    ArchReport report;
    report.arch_id = arch.id;
    report.rows.reserve(net.layers.size() + 3);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        ReportRow row;
        row.layer = net.layers[i].name;
        row.out_shape = trace[i].second;
        row.params = params[i].learnable;
        row.buffers = params[i].buffers;
        row.macs = macs[i].macs;
        row.act_bytes = 4 * elements(row.out_shape);
        report.rows.push_back(std::move(row));
    }

    if (arch.flip_head) {
        const int dim = arch.flip_head->dim;
        const long long fc_params = static_cast<long long>(dim) * dim + dim;
        const std::vector<int> vec_shape{dim};
        report.rows.push_back({arch.flip_head->fc1_name, vec_shape, fc_params, 0,
                               static_cast<long long>(dim) * dim, 4ll * dim});
        report.rows.push_back({arch.flip_head->fc1_name + ".relu", vec_shape, 0, 0, dim, 4ll * dim});
        report.rows.push_back({arch.flip_head->fc2_name, vec_shape, fc_params, 0,
                               static_cast<long long>(dim) * dim, 4ll * dim});
    }

    for (const ReportRow& row : report.rows) {
        report.total_params += row.params;
        report.total_buffers += row.buffers;
        report.total_macs += row.macs;
    }
    std::tie(report.peak_act_bytes, report.peak_layer) = peak_activation(net);
    report.downsampling = downsampling_report(net);
    return report;
}

}  // namespace mobiface
