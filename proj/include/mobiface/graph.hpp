#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mobiface/tensor.hpp"

namespace mobiface {

class WeightStore;

// One bottleneck block: 1x1 expand -> 3x3 depthwise (stride s) -> 1x1
// linear projection, optionally wrapped in a shortcut.
struct BlockSpec {
    int in_channels = 0;   // k
    int out_channels = 0;  // k1
    int expansion = 2;     // t; expanded width is t * in_channels
    int stride = 1;        // applied by the depthwise stage
    bool residual = false; // requires stride == 1 and in_channels == out_channels
};

enum class LayerKind {
    Conv,
    DWConv,
    BatchNorm,
    PReLU,
    ReLU,
    FC,
    Flatten,
    ResidualBegin,
    ResidualEnd,
};

// One executable step. Weight tensors are bound by name: "<name>.weight"
// for convolutions, "<name>.gamma"/".beta"/".running_mean"/".running_var"
// for batch norm, "<name>.slopes" for PReLU, "<name>.weight"/".bias" for FC.
struct LayerSpec {
    LayerKind kind;
    std::string name;   // unique within a network
    int stage = -1;     // index into NetworkSpec::stages, -1 if unset
    int in_channels = 0, out_channels = 0;
    int kernel = 0, stride = 1, pad = 0;
    int in_dim = 0, out_dim = 0;  // FC only
};

// Architecture-table row a group of layers belongs to; drives `describe`.
struct StageInfo {
    std::string label;
    std::string operator_desc;
};

struct NetworkSpec {
    std::vector<int> input_shape;  // [C, H, W]
    std::vector<LayerSpec> layers;
    std::vector<StageInfo> stages;
    int embedding_dim = 0;
};

// Two stacked FC layers (dim -> dim) with a ReLU after the first; predicts
// the mirror image's embedding from the original's.
struct FlipHeadSpec {
    int dim = 512;
    std::string fc1_name = "flip_head.fc1";
    std::string fc2_name = "flip_head.fc2";
};

struct Arch {
    std::string id;
    NetworkSpec net;
    std::optional<FlipHeadSpec> flip_head;
};

// Emits expand/depthwise/project layers (BN after each conv, PReLU after
// the first two; the projection stays linear), wrapped in shortcut markers
// iff spec.residual.
std::vector<LayerSpec> build_bottleneck(const BlockSpec& spec,
                                        const std::string& prefix = "block",
                                        int stage = -1);

// The stock 112x112x3 -> 512-d embedding network.
NetworkSpec build_mobiface();

FlipHeadSpec build_flip_head(int dim = 512);

// "mobiface" or "mobiface-flipped"; throws on anything else.
Arch make_arch(const std::string& id);

const std::vector<std::string>& known_arch_ids();

// Weight tensor names a layer binds, in serialization order.
std::vector<std::string> layer_weight_names(const LayerSpec& layer);

// Expected shape of one bound weight tensor.
std::vector<int> weight_shape(const LayerSpec& layer, const std::string& weight_name);

// Symbolic per-layer shape propagation; touches no weights. Shapes omit the
// batch dimension ([C,H,W], then [dim] after Flatten/FC). Throws on any
// inconsistency, naming the offending layer.
std::vector<std::pair<std::string, std::vector<int>>> shape_trace(const NetworkSpec& net);

// Architecture-table view: one row per stage plus the final output row.
struct TraceRow {
    std::string label;
    std::vector<int> input_shape;  // [C,H,W] entering the stage, or [dim]
    std::string operator_desc;
};
std::vector<TraceRow> table_trace(const NetworkSpec& net);

// Runs the network on a [N, C, H, W] batch; returns [N, embedding_dim].
// Deterministic: identical inputs give bitwise-identical outputs.
Tensor forward(const NetworkSpec& net, const WeightStore& weights, const Tensor& x);

// f_I = forward(x); the head predicts the mirror embedding from f_I without
// a second network pass; returns 0.5 * (f_I + head(f_I)).
Tensor embed_with_flip(const NetworkSpec& net, const FlipHeadSpec& head,
                       const WeightStore& weights, const Tensor& x);

// Ground-truth pair (forward(x), forward(hflip(x))); runs the network twice.
std::pair<Tensor, Tensor> true_flip_features(const NetworkSpec& net, const WeightStore& weights,
                                             const Tensor& x);

// Process-wide count of forward() invocations; lets callers check how many
// network passes an embedding path performed.
std::uint64_t forward_run_count();
void reset_forward_run_count();

}  // namespace mobiface
