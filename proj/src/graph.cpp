#include "mobiface/graph.hpp"

#include <atomic>
#include <stdexcept>

#include "mobiface/nn_ops.hpp"
#include "mobiface/weights_io.hpp"

namespace mobiface {

namespace {

std::atomic<std::uint64_t> g_forward_runs{0};

LayerSpec conv_layer(std::string name, int stage, int cin, int cout, int k, int s, int pad) {
    LayerSpec l;
    l.kind = LayerKind::Conv;
    l.name = std::move(name);
    l.stage = stage;
    l.in_channels = cin;
    l.out_channels = cout;
    l.kernel = k;
    l.stride = s;
    l.pad = pad;
    return l;
}

LayerSpec dwconv_layer(std::string name, int stage, int channels, int k, int s, int pad) {
    LayerSpec l;
    l.kind = LayerKind::DWConv;
    l.name = std::move(name);
    l.stage = stage;
    l.in_channels = channels;
    l.out_channels = channels;
    l.kernel = k;
    l.stride = s;
    l.pad = pad;
    return l;
}

LayerSpec channel_layer(LayerKind kind, std::string name, int stage, int channels) {
    LayerSpec l;
    l.kind = kind;
    l.name = std::move(name);
    l.stage = stage;
    l.in_channels = channels;
    l.out_channels = channels;
    return l;
}

void append_bn_prelu(std::vector<LayerSpec>& out, const std::string& base, int stage,
                     int channels) {
    out.push_back(channel_layer(LayerKind::BatchNorm, base + ".bn", stage, channels));
    out.push_back(channel_layer(LayerKind::PReLU, base + ".prelu", stage, channels));
}

std::string block_desc(const BlockSpec& b, int count) {
    const int expanded = b.expansion * b.in_channels;
    std::string s = b.residual ? "RBlock" : "Block";
    s += " x" + std::to_string(count);
    s += " [1x1 Conv " + std::to_string(expanded);
    s += " | 3x3 DWConv " + std::string(b.stride == 2 ? "/2 " : "") + std::to_string(expanded);
    s += " | 1x1 Conv Linear " + std::to_string(b.out_channels) + "]";
    return s;
}

}  // namespace

std::vector<LayerSpec> build_bottleneck(const BlockSpec& spec, const std::string& prefix,
                                        int stage) {
    if (spec.in_channels < 1 || spec.out_channels < 1) {
        throw std::invalid_argument("bottleneck '" + prefix + "': channel counts must be >= 1");
    }
    if (spec.expansion < 1) {
        throw std::invalid_argument("bottleneck '" + prefix + "': expansion factor must be >= 1");
    }
    if (spec.stride != 1 && spec.stride != 2) {
        throw std::invalid_argument("bottleneck '" + prefix + "': stride must be 1 or 2");
    }
    if (spec.residual && spec.stride != 1) {
        throw std::invalid_argument("bottleneck '" + prefix +
                                    "': residual block requires stride 1");
    }
    if (spec.residual && spec.in_channels != spec.out_channels) {
        throw std::invalid_argument("bottleneck '" + prefix +
                                    "': residual block requires matching channel counts");
    }

    const int expanded = spec.expansion * spec.in_channels;
    std::vector<LayerSpec> layers;
    if (spec.residual) {
        layers.push_back(channel_layer(LayerKind::ResidualBegin, prefix + ".shortcut_begin",
                                       stage, spec.in_channels));
    }
    layers.push_back(conv_layer(prefix + ".expand", stage, spec.in_channels, expanded, 1, 1, 0));
    append_bn_prelu(layers, prefix + ".expand", stage, expanded);
    layers.push_back(dwconv_layer(prefix + ".dw", stage, expanded, 3, spec.stride, 1));
    append_bn_prelu(layers, prefix + ".dw", stage, expanded);
    layers.push_back(conv_layer(prefix + ".project", stage, expanded, spec.out_channels, 1, 1, 0));
    // the projection is the "Linear" layer: batch norm, no activation
    layers.push_back(
        channel_layer(LayerKind::BatchNorm, prefix + ".project.bn", stage, spec.out_channels));
    if (spec.residual) {
        layers.push_back(channel_layer(LayerKind::ResidualEnd, prefix + ".shortcut_end", stage,
                                       spec.out_channels));
    }
    return layers;
}

NetworkSpec build_mobiface() {
    NetworkSpec net;
    net.input_shape = {3, 112, 112};
    net.embedding_dim = 512;

    auto add_stage = [&net](const std::string& label, const std::string& desc) {
        net.stages.push_back({label, desc});
        return static_cast<int>(net.stages.size()) - 1;
    };
    auto append = [&net](std::vector<LayerSpec> layers) {
        for (auto& l : layers) net.layers.push_back(std::move(l));
    };

    int st = add_stage("conv1", "3x3 Conv, /2, 64");
    net.layers.push_back(conv_layer("conv1", st, 3, 64, 3, 2, 1));
    append_bn_prelu(net.layers, "conv1", st, 64);

    st = add_stage("dwconv2", "3x3 DWConv, 64");
    net.layers.push_back(dwconv_layer("dwconv2", st, 64, 3, 1, 1));
    append_bn_prelu(net.layers, "dwconv2", st, 64);

    struct Row {
        int count;
        BlockSpec spec;
        const char* base;
    };
    const Row rows[] = {
        {1, {64, 64, 2, 2, false}, "block3"},
        {2, {64, 64, 2, 1, true}, "rblock4"},
        {1, {64, 128, 2, 2, false}, "block5"},
        {3, {128, 128, 2, 1, true}, "rblock6"},
        {1, {128, 256, 2, 2, false}, "block7"},
        {6, {256, 256, 2, 1, true}, "rblock8"},
    };
    for (const Row& row : rows) {
        st = add_stage(row.base, block_desc(row.spec, row.count));
        for (int i = 0; i < row.count; ++i) {
            const std::string prefix =
                row.count > 1 ? row.base + ("_" + std::to_string(i + 1)) : row.base;
            append(build_bottleneck(row.spec, prefix, st));
        }
    }

    st = add_stage("conv9", "1x1 Conv, 512");
    net.layers.push_back(conv_layer("conv9", st, 256, 512, 1, 1, 0));
    append_bn_prelu(net.layers, "conv9", st, 512);

    st = add_stage("fc10", "512-d FC");
    LayerSpec flat;
    flat.kind = LayerKind::Flatten;
    flat.name = "flatten";
    flat.stage = st;
    net.layers.push_back(flat);
    LayerSpec fc;
    fc.kind = LayerKind::FC;
    fc.name = "fc10";
    fc.stage = st;
    fc.in_dim = 512 * 7 * 7;
    fc.out_dim = 512;
    net.layers.push_back(fc);

    return net;
}

FlipHeadSpec build_flip_head(int dim) {
    FlipHeadSpec head;
    head.dim = dim;
    return head;
}

const std::vector<std::string>& known_arch_ids() {
    static const std::vector<std::string> ids = {"mobiface", "mobiface-flipped"};
    return ids;
}

Arch make_arch(const std::string& id) {
    Arch arch;
    arch.id = id;
    if (id == "mobiface") {
        arch.net = build_mobiface();
    } else if (id == "mobiface-flipped") {
        arch.net = build_mobiface();
        arch.flip_head = build_flip_head(arch.net.embedding_dim);
    } else {
        throw std::invalid_argument("unknown architecture '" + id +
                                    "' (expected mobiface or mobiface-flipped)");
    }
    return arch;
}

std::vector<std::string> layer_weight_names(const LayerSpec& layer) {
    switch (layer.kind) {
        case LayerKind::Conv:
        case LayerKind::DWConv:
            return {layer.name + ".weight"};
        case LayerKind::BatchNorm:
            return {layer.name + ".gamma", layer.name + ".beta", layer.name + ".running_mean",
                    layer.name + ".running_var"};
        case LayerKind::PReLU:
            return {layer.name + ".slopes"};
        case LayerKind::FC:
            return {layer.name + ".weight", layer.name + ".bias"};
        default:
            return {};
    }
}

std::vector<int> weight_shape(const LayerSpec& layer, const std::string& weight_name) {
    const std::string suffix =
        weight_name.size() > layer.name.size() ? weight_name.substr(layer.name.size()) : "";
    switch (layer.kind) {
        case LayerKind::Conv:
            return {layer.out_channels, layer.in_channels, layer.kernel, layer.kernel};
        case LayerKind::DWConv:
            return {layer.out_channels, 1, layer.kernel, layer.kernel};
        case LayerKind::BatchNorm:
        case LayerKind::PReLU:
            return {layer.out_channels};
        case LayerKind::FC:
            if (suffix == ".bias") return {layer.out_dim};
            return {layer.out_dim, layer.in_dim};
        default:
            throw std::invalid_argument("layer '" + layer.name + "' binds no weights");
    }
}

namespace {

[[noreturn]] void trace_error(const LayerSpec& layer, const std::string& msg) {
    throw std::invalid_argument("layer '" + layer.name + "': " + msg);
}

std::vector<int> propagate(const LayerSpec& layer, const std::vector<int>& in,
                           std::vector<std::vector<int>>& shortcut_stack) {
    const bool spatial = in.size() == 3;
    switch (layer.kind) {
        case LayerKind::Conv: {
            if (!spatial) trace_error(layer, "expects a C,H,W input");
            if (in[0] != layer.in_channels)
                trace_error(layer, "expects " + std::to_string(layer.in_channels) +
                                       " input channels, trace has " + std::to_string(in[0]));
            return {layer.out_channels, conv_output_extent(in[1], layer.kernel, layer.stride, layer.pad),
                    conv_output_extent(in[2], layer.kernel, layer.stride, layer.pad)};
        }
        case LayerKind::DWConv: {
            if (!spatial) trace_error(layer, "expects a C,H,W input");
            if (in[0] != layer.in_channels)
                trace_error(layer, "expects " + std::to_string(layer.in_channels) +
                                       " channels, trace has " + std::to_string(in[0]));
            return {layer.out_channels, conv_output_extent(in[1], layer.kernel, layer.stride, layer.pad),
                    conv_output_extent(in[2], layer.kernel, layer.stride, layer.pad)};
        }
        case LayerKind::BatchNorm:
        case LayerKind::PReLU:
            if (!spatial) trace_error(layer, "expects a C,H,W input");
            if (in[0] != layer.in_channels)
                trace_error(layer, "parameter length " + std::to_string(layer.in_channels) +
                                       " != trace channels " + std::to_string(in[0]));
            return in;
        case LayerKind::ReLU:
            return in;
        case LayerKind::Flatten: {
            if (!spatial) trace_error(layer, "expects a C,H,W input");
            return {in[0] * in[1] * in[2]};
        }
        case LayerKind::FC:
            if (in.size() != 1) trace_error(layer, "expects a flattened input");
            if (in[0] != layer.in_dim)
                trace_error(layer, "in_dim " + std::to_string(layer.in_dim) +
                                       " != incoming size " + std::to_string(in[0]));
            return {layer.out_dim};
        case LayerKind::ResidualBegin:
            shortcut_stack.push_back(in);
            return in;
        case LayerKind::ResidualEnd: {
            if (shortcut_stack.empty()) trace_error(layer, "shortcut end without begin");
            const std::vector<int> saved = shortcut_stack.back();
            shortcut_stack.pop_back();
            if (saved != in)
                trace_error(layer, "shortcut shape " + shape_string(saved) +
                                       " != branch shape " + shape_string(in));
            return in;
        }
    }
    trace_error(layer, "unhandled layer kind");
}

}  // namespace

std::vector<std::pair<std::string, std::vector<int>>> shape_trace(const NetworkSpec& net) {
    if (net.input_shape.size() != 3) {
        throw std::invalid_argument("network input shape must be [C,H,W]");
    }
    std::vector<std::pair<std::string, std::vector<int>>> trace;
    trace.reserve(net.layers.size());
    std::vector<int> cur = net.input_shape;
    std::vector<std::vector<int>> shortcuts;
    for (const LayerSpec& layer : net.layers) {
        cur = propagate(layer, cur, shortcuts);
        trace.emplace_back(layer.name, cur);
    }
    if (!shortcuts.empty()) {
        throw std::invalid_argument("network has an unclosed shortcut");
    }
    return trace;
}

std::vector<TraceRow> table_trace(const NetworkSpec& net) {
    const auto trace = shape_trace(net);  // validates the spec end to end
    std::vector<TraceRow> rows;
    rows.reserve(net.stages.size() + 1);
    std::vector<int> cur = net.input_shape;
    int next_stage = 0;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].stage == next_stage) {
            const StageInfo& info = net.stages[static_cast<std::size_t>(next_stage)];
            rows.push_back({info.label, cur, info.operator_desc});
            ++next_stage;
        }
        cur = trace[i].second;
    }
    rows.push_back({"output", cur, "embedding"});
    return rows;
}

namespace {

const Tensor& fetch(const WeightStore& weights, const LayerSpec& layer,
                    const std::string& name) {
    const Tensor& t = weights.get(name);
    const std::vector<int> expected = weight_shape(layer, name);
    if (t.shape() != expected) {
        throw std::invalid_argument("weight '" + name + "' has shape " +
                                    shape_string(t.shape()) + ", expected " +
                                    shape_string(expected));
    }
    return t;
}

Tensor copy_row(const Tensor& batch, int n, int dim) {
    const float* src = batch.data() + static_cast<std::size_t>(n) * dim;
    return Tensor({dim}, std::vector<float>(src, src + dim));
}

}  // namespace

Tensor forward(const NetworkSpec& net, const WeightStore& weights, const Tensor& x) {
    g_forward_runs.fetch_add(1, std::memory_order_relaxed);
    if (x.rank() != 4) {
        throw std::invalid_argument("forward: input must be rank-4 [N,C,H,W]");
    }
    if (x.dim(1) != net.input_shape[0] || x.dim(2) != net.input_shape[1] ||
        x.dim(3) != net.input_shape[2]) {
        throw std::invalid_argument("forward: input shape " + shape_string(x.shape()) +
                                    " does not match network input " +
                                    shape_string(net.input_shape));
    }

    Tensor cur = x;
    std::vector<Tensor> shortcuts;
    for (const LayerSpec& layer : net.layers) {
        try {
            switch (layer.kind) {
                case LayerKind::Conv: {
                    ConvParams p;
                    p.kernel = fetch(weights, layer, layer.name + ".weight");
                    p.stride = layer.stride;
                    p.pad = layer.pad;
                    cur = conv2d(cur, p);
                    break;
                }
                case LayerKind::DWConv: {
                    DwConvParams p;
                    p.kernel = fetch(weights, layer, layer.name + ".weight");
                    p.stride = layer.stride;
                    p.pad = layer.pad;
                    cur = dwconv2d(cur, p);
                    break;
                }
                case LayerKind::BatchNorm: {
                    BatchNormParams p;
                    p.gamma = fetch(weights, layer, layer.name + ".gamma");
                    p.beta = fetch(weights, layer, layer.name + ".beta");
                    p.running_mean = fetch(weights, layer, layer.name + ".running_mean");
                    p.running_var = fetch(weights, layer, layer.name + ".running_var");
                    cur = batchnorm(cur, p);
                    break;
                }
                case LayerKind::PReLU: {
                    PReLUParams p;
                    p.slopes = fetch(weights, layer, layer.name + ".slopes");
                    cur = prelu(cur, p);
                    break;
                }
                case LayerKind::ReLU:
                    cur = relu(cur);
                    break;
                case LayerKind::Flatten:
                    cur = flatten(cur);
                    break;
                case LayerKind::FC: {
                    FcParams p;
                    p.weight = fetch(weights, layer, layer.name + ".weight");
                    p.bias = fetch(weights, layer, layer.name + ".bias");
                    if (cur.rank() != 2 || cur.dim(1) != layer.in_dim) {
                        throw std::invalid_argument("expected [N," + std::to_string(layer.in_dim) +
                                                    "] input, got " + shape_string(cur.shape()));
                    }
                    Tensor out({cur.dim(0), layer.out_dim});
                    for (int n = 0; n < cur.dim(0); ++n) {
                        const Tensor y = fully_connected(copy_row(cur, n, layer.in_dim), p);
                        float* dst = out.data() + static_cast<std::size_t>(n) * layer.out_dim;
                        for (int i = 0; i < layer.out_dim; ++i) dst[i] = y.at(static_cast<std::size_t>(i));
                    }
                    cur = std::move(out);
                    break;
                }
                case LayerKind::ResidualBegin:
                    shortcuts.push_back(cur);
                    break;
                case LayerKind::ResidualEnd: {
                    if (shortcuts.empty()) {
                        throw std::invalid_argument("shortcut end without begin");
                    }
                    Tensor saved = std::move(shortcuts.back());
                    shortcuts.pop_back();
                    cur = residual_add(saved, cur);
                    break;
                }
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("layer '" + layer.name + "': " + e.what());
        }
    }
    if (cur.rank() != 2 || cur.dim(1) != net.embedding_dim) {
        throw std::runtime_error("forward: network did not end at a [N," +
                                 std::to_string(net.embedding_dim) + "] embedding, got " +
                                 shape_string(cur.shape()));
    }
    ensure_finite(cur, "forward output");
    return cur;
}

Tensor embed_with_flip(const NetworkSpec& net, const FlipHeadSpec& head,
                       const WeightStore& weights, const Tensor& x) {
    if (head.dim != net.embedding_dim) {
        throw std::invalid_argument("flip head dim " + std::to_string(head.dim) +
                                    " != embedding dim " + std::to_string(net.embedding_dim));
    }
    FcParams fc1{weights.get(head.fc1_name + ".weight"), weights.get(head.fc1_name + ".bias")};
    FcParams fc2{weights.get(head.fc2_name + ".weight"), weights.get(head.fc2_name + ".bias")};
    for (const FcParams* fc : {&fc1, &fc2}) {
        if (fc->weight.rank() != 2 || fc->weight.dim(0) != head.dim ||
            fc->weight.dim(1) != head.dim || fc->bias.dim(0) != head.dim) {
            throw std::invalid_argument("flip head weights must be [" + std::to_string(head.dim) +
                                        "," + std::to_string(head.dim) + "] with matching bias");
        }
    }

    // One network pass; the head stands in for the mirrored second pass.
    const Tensor features = forward(net, weights, x);
    const int batch = features.dim(0), dim = features.dim(1);
    Tensor out(features.shape());
    for (int n = 0; n < batch; ++n) {
        const Tensor f = copy_row(features, n, dim);
        const Tensor predicted = fully_connected(relu(fully_connected(f, fc1)), fc2);
        float* dst = out.data() + static_cast<std::size_t>(n) * dim;
        for (int i = 0; i < dim; ++i) {
            dst[i] = 0.5f * (f.at(static_cast<std::size_t>(i)) +
                             predicted.at(static_cast<std::size_t>(i)));
        }
    }
    return out;
}

std::pair<Tensor, Tensor> true_flip_features(const NetworkSpec& net, const WeightStore& weights,
                                             const Tensor& x) {
    Tensor f_orig = forward(net, weights, x);
    Tensor f_mirror = forward(net, weights, hflip(x));
    return {std::move(f_orig), std::move(f_mirror)};
}

std::uint64_t forward_run_count() { return g_forward_runs.load(std::memory_order_relaxed); }

void reset_forward_run_count() { g_forward_runs.store(0, std::memory_order_relaxed); }

}  // namespace mobiface
