#include "pimnet/model.hpp"

#include <cmath>
#include <functional>
#include <unordered_map>

#include "json.hpp"
#include "pimnet/errors.hpp"
#include "pimnet/ops.hpp"
#include "pimnet/rng.hpp"

namespace pimnet::models {

using nlohmann::json;

namespace {

struct ConvStage {
    std::string name;
    std::size_t c_in, c_out, k, r;
    bool last;
};

struct Plan {
    std::vector<ConvStage> convs; // conv1..conv4
    std::vector<std::pair<std::size_t, std::size_t>> fcs;
    std::size_t lut_channels = 0;
};

Plan make_plan(const ModelSpec& s)
{
    Plan p;
    const auto& w = s.widths;
    const std::size_t nfc = s.fc_layers();
    const std::size_t mid_out = s.variant == Variant::static_lut ? w[1] : w[1 + nfc];
    p.convs.push_back({"conv1", s.input_channels(), w[0], s.kernel_sizes[0], s.dilations[0], false});
    p.convs.push_back({"conv2", w[0], w[1], s.kernel_sizes[1], s.dilations[1], false});
    for (std::size_t j = 0; j < nfc; ++j) p.fcs.emplace_back(w[1 + j], w[2 + j]);
    if (s.variant == Variant::static_lut) p.lut_channels = w[1];
    p.convs.push_back({"conv3", mid_out, w.back(), s.kernel_sizes[2], s.dilations[2], false});
    p.convs.push_back({"conv4", w.back(), s.output_channels(), s.kernel_sizes[3], s.dilations[3], true});
    return p;
}

nn::ConvSpec conv_spec(nn::ConvKind kind, std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t r)
{
    nn::ConvSpec c;
    c.kind = kind;
    c.c_in = c_in;
    c.c_out = c_out;
    c.k = k;
    c.dilation = r;
    return c;
}

// Parameter tensors in creation order: (name, shape, fan_in, init kind).
enum class Init { uniform, zero, one, lut_identity };

struct ParamDecl {
    std::string name;
    Shape shape;
    std::size_t fan_in;
    Init init;
};

std::vector<ParamDecl> declare(const ModelSpec& s)
{
    const Plan plan = make_plan(s);
    std::vector<ParamDecl> out;
    auto norm = [&](const ConvStage& c) {
        if (s.norm.kind == nn::NormKind::channel && !c.last) {
            out.push_back({c.name + ".norm.scale", {c.c_out}, 0, Init::one});
            out.push_back({c.name + ".norm.shift", {c.c_out}, 0, Init::zero});
        }
    };
    auto conv = [&](const ConvStage& c) {
        const Init w_init = c.last ? Init::zero : Init::uniform;
        if (s.conv_block == ConvBlock::standard) {
            out.push_back({c.name + ".weight", {c.c_out, c.c_in, c.k}, c.c_in * c.k, w_init});
            out.push_back({c.name + ".bias", {c.c_out}, 0, Init::zero});
        } else {
            out.push_back({c.name + ".dw.weight", {c.c_in, c.k}, c.k, Init::uniform});
            out.push_back({c.name + ".dw.bias", {c.c_in}, 0, Init::zero});
            out.push_back({c.name + ".pw.weight", {c.c_out, c.c_in}, c.c_in, w_init});
            out.push_back({c.name + ".pw.bias", {c.c_out}, 0, Init::zero});
        }
        norm(c);
    };
    conv(plan.convs[0]);
    conv(plan.convs[1]);
    if (plan.lut_channels) {
        const std::size_t rows = s.lut.per_channel ? plan.lut_channels : 1;
        out.push_back({"lut.table", {rows, s.lut.q}, 0, Init::lut_identity});
    }
    for (std::size_t j = 0; j < plan.fcs.size(); ++j) {
        const auto [in, o] = plan.fcs[j];
        const std::string n = "fc" + std::to_string(j + 1);
        out.push_back({n + ".weight", {o, in}, in, Init::uniform});
        out.push_back({n + ".bias", {o}, 0, Init::zero});
    }
    conv(plan.convs[2]);
    conv(plan.convs[3]);
    return out;
}

using ParamFn = std::function<ad::Var(const std::string&)>;

ad::Var conv_stage(const ModelSpec& s, const ConvStage& c, const ParamFn& param, ad::Var x)
{
    ad::Var y = x;
    if (s.conv_block == ConvBlock::standard) {
        y = nn::conv1d_dilated(y, conv_spec(nn::ConvKind::standard, c.c_in, c.c_out, c.k, c.r),
                               param(c.name + ".weight"), param(c.name + ".bias"));
    } else {
        y = nn::depthwise_separable(y, conv_spec(nn::ConvKind::depthwise, c.c_in, c.c_in, c.k, c.r),
                                    param(c.name + ".dw.weight"), param(c.name + ".dw.bias"),
                                    conv_spec(nn::ConvKind::pointwise, c.c_in, c.c_out, 1, 1),
                                    param(c.name + ".pw.weight"), param(c.name + ".pw.bias"), s.separable_activation,
                                    s.leaky_slope);
    }
    if (c.last) return y;
    if (s.norm.kind == nn::NormKind::channel)
        y = nn::channel_norm(y, param(c.name + ".norm.scale"), param(c.name + ".norm.shift"), s.norm.epsilon);
    return nn::activate(y, s.conv_activation, s.leaky_slope);
}

ad::Var run(const ModelSpec& s, const ParamFn& param, ad::Var x)
{
    s.validate();
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || xv.dim(0) != s.input_channels())
        throw ShapeError("model forward: expected input [" + std::to_string(s.input_channels()) + ", T], got " +
                         shape_str(xv.shape()));
    const std::size_t rf = receptive_field(s);
    if (xv.dim(1) < rf)
        throw ShapeError("model forward: input length " + std::to_string(xv.dim(1)) +
                         " is shorter than the receptive field " + std::to_string(rf));

    const Plan plan = make_plan(s);
    ad::Var h = conv_stage(s, plan.convs[0], param, x);
    h = conv_stage(s, plan.convs[1], param, h);
    if (plan.lut_channels) {
        h = nn::lut_forward(h, param("lut.table"), s.lut);
        h = ad::relu(h);
    }
    for (std::size_t j = 0; j < plan.fcs.size(); ++j) {
        const std::string n = "fc" + std::to_string(j + 1);
        h = nn::fully_connected(h, param(n + ".weight"), param(n + ".bias"));
        h = ad::centered_sigmoid(h);
    }
    h = conv_stage(s, plan.convs[2], param, h);
    return conv_stage(s, plan.convs[3], param, h);
}

} // namespace

std::string to_string(Variant v)
{
    switch (v) {
    case Variant::static_lut: return "static_lut";
    case Variant::dynamic_fc3: return "dynamic_fc3";
    case Variant::lightweight_fc2: return "lightweight_fc2";
    }
    return "?";
}

Variant variant_from_string(const std::string& s)
{
    for (auto v : {Variant::static_lut, Variant::dynamic_fc3, Variant::lightweight_fc2})
        if (to_string(v) == s) return v;
    throw ConfigError("unknown model variant '" + s + "'");
}

std::string to_string(ConvBlock b) { return b == ConvBlock::standard ? "standard" : "separable"; }

ConvBlock conv_block_from_string(const std::string& s)
{
    if (s == "standard") return ConvBlock::standard;
    if (s == "separable") return ConvBlock::separable;
    throw ConfigError("unknown conv block '" + s + "'");
}

std::size_t ModelSpec::fc_layers() const
{
    switch (variant) {
    case Variant::static_lut: return 0;
    case Variant::dynamic_fc3: return 3;
    case Variant::lightweight_fc2: return 2;
    }
    return 0;
}

void ModelSpec::validate() const
{
    if (tx_antennas == 0 || rx_antennas == 0) throw ConfigError("model spec: antenna counts must be positive");
    const std::size_t expected = 3 + fc_layers();
    if (widths.size() != expected)
        throw ConfigError("model spec: " + to_string(variant) + " needs " + std::to_string(expected) +
                          " widths (conv1, conv2, " + (fc_layers() ? std::to_string(fc_layers()) + " fc, " : "") +
                          "conv3), got " + std::to_string(widths.size()));
    static const char* stage_names[] = {"conv1", "conv2", "fc1", "fc2", "fc3"};
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (widths[i] == 0) {
            const std::string stage = i + 1 == widths.size() ? "conv3" : stage_names[i];
            throw ConfigError("model spec: stage " + stage + " has zero width");
        }
    }
    if (kernel_sizes.size() != 4 || dilations.size() != 4)
        throw ConfigError("model spec: kernel_sizes and dilations need one entry per conv stage (4)");
    for (std::size_t i = 0; i < 4; ++i) {
        if (kernel_sizes[i] == 0 || dilations[i] == 0)
            throw ConfigError("model spec: stage conv" + std::to_string(i + 1) +
                              " needs kernel size and dilation >= 1");
    }
    if (variant == Variant::static_lut) lut.validate();
    norm.validate();
    if (!(leaky_slope >= 0.0)) throw ConfigError("model spec: leaky slope must be non-negative");
}

std::string spec_to_json(const ModelSpec& s)
{
    json j;
    j["variant"] = to_string(s.variant);
    j["tx_antennas"] = s.tx_antennas;
    j["rx_antennas"] = s.rx_antennas;
    j["widths"] = s.widths;
    j["kernel_sizes"] = s.kernel_sizes;
    j["dilations"] = s.dilations;
    j["conv_block"] = to_string(s.conv_block);
    j["conv_activation"] = nn::to_string(s.conv_activation);
    j["separable_activation"] = nn::to_string(s.separable_activation);
    j["leaky_slope"] = s.leaky_slope;
    j["lut"] = {{"q", s.lut.q}, {"range", s.lut.range}, {"per_channel", s.lut.per_channel}};
    j["norm"] = {{"kind", s.norm.kind == nn::NormKind::channel ? "channel" : "none"}, {"epsilon", s.norm.epsilon}};
    return j.dump();
}

ModelSpec spec_from_json(const std::string& text)
{
    try {
        const json j = json::parse(text);
        ModelSpec s;
        s.variant = variant_from_string(j.at("variant").get<std::string>());
        s.tx_antennas = j.at("tx_antennas").get<std::size_t>();
        s.rx_antennas = j.at("rx_antennas").get<std::size_t>();
        s.widths = j.at("widths").get<std::vector<std::size_t>>();
        s.kernel_sizes = j.at("kernel_sizes").get<std::vector<std::size_t>>();
        s.dilations = j.at("dilations").get<std::vector<std::size_t>>();
        s.conv_block = conv_block_from_string(j.at("conv_block").get<std::string>());
        s.conv_activation = nn::activation_from_string(j.at("conv_activation").get<std::string>());
        s.separable_activation = nn::activation_from_string(j.at("separable_activation").get<std::string>());
        s.leaky_slope = j.at("leaky_slope").get<double>();
        s.lut.q = j.at("lut").at("q").get<std::size_t>();
        s.lut.range = j.at("lut").at("range").get<double>();
        s.lut.per_channel = j.at("lut").at("per_channel").get<bool>();
        const std::string nk = j.at("norm").at("kind").get<std::string>();
        if (nk != "none" && nk != "channel") throw ConfigError("unknown norm kind '" + nk + "'");
        s.norm.kind = nk == "channel" ? nn::NormKind::channel : nn::NormKind::none;
        s.norm.epsilon = j.at("norm").at("epsilon").get<double>();
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model spec JSON: ") + e.what());
    }
}

void ModelParams::add(std::string name, Tensor tensor)
{
    if (contains(name)) throw std::logic_error("duplicate parameter '" + name + "'");
    entries_.push_back({std::move(name), std::move(tensor)});
}

bool ModelParams::contains(const std::string& name) const
{
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

Tensor& ModelParams::get(const std::string& name)
{
    for (auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw std::out_of_range("no parameter named '" + name + "'");
}

const Tensor& ModelParams::get(const std::string& name) const
{
    return const_cast<ModelParams*>(this)->get(name);
}

std::size_t ModelParams::element_count() const
{
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

void ModelParams::set_requires_grad(bool on)
{
    for (auto& e : entries_) e.tensor.set_requires_grad(on);
}

void ModelParams::zero_grad()
{
    for (auto& e : entries_) e.tensor.zero_grad();
}

bool ModelParams::all_finite() const
{
    for (const auto& e : entries_)
        if (!e.tensor.all_finite()) return false;
    return true;
}

std::size_t param_count(const ModelSpec& s)
{
    s.validate();
    const Plan plan = make_plan(s);
    std::size_t n = 0;
    for (const auto& c : plan.convs) {
        if (s.conv_block == ConvBlock::standard)
            n += c.k * c.c_in * c.c_out + c.c_out;
        else
            n += (c.k * c.c_in + c.c_in) + (c.c_in * c.c_out + c.c_out);
        if (s.norm.kind == nn::NormKind::channel && !c.last) n += 2 * c.c_out;
    }
    for (const auto& [in, out] : plan.fcs) n += in * out + out;
    if (plan.lut_channels) n += s.lut.param_count(plan.lut_channels);
    return n;
}

std::size_t receptive_field(const ModelSpec& s)
{
    std::size_t rf = 1;
    for (std::size_t i = 0; i < s.kernel_sizes.size() && i < s.dilations.size(); ++i)
        rf += (s.kernel_sizes[i] - 1) * s.dilations[i];
    return rf;
}

ModelParams build(const ModelSpec& spec, std::uint64_t seed)
{
    spec.validate();
    Rng rng(derive_seed(seed, 0x6d6f64656cULL));
    ModelParams params;
    for (const auto& d : declare(spec)) {
        Tensor t(d.shape);
        switch (d.init) {
        case Init::uniform: {
            const double b = 1.0 / std::sqrt(static_cast<double>(d.fan_in));
            for (auto& v : t.data()) v = rng.uniform(-b, b);
            break;
        }
        case Init::zero: break;
        case Init::one:
            for (auto& v : t.data()) v = 1.0;
            break;
        case Init::lut_identity: t = nn::lut_identity_table(spec.lut, spec.widths[1]); break;
        }
        params.add(d.name, std::move(t));
    }
    return params;
}

ad::Var forward(ad::Tape& tape, ModelParams& params, const ModelSpec& spec, ad::Var x)
{
    std::unordered_map<std::string, ad::Var> leaves;
    return run(spec,
               [&](const std::string& name) {
                   auto it = leaves.find(name);
                   if (it != leaves.end()) return it->second;
                   ad::Var v = tape.leaf(params.get(name));
                   leaves.emplace(name, v);
                   return v;
               },
               x);
}

Tensor predict(const ModelParams& params, const ModelSpec& spec, const Tensor& x)
{
    ad::Tape tape(false);
    ad::Var in = tape.constant_ref(x);
    ad::Var out = run(spec, [&](const std::string& name) { return tape.constant_ref(params.get(name)); }, in);
    return out.value().detached();
}

} // namespace pimnet::models
