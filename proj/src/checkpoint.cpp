#include "tsigan/network.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <map>

namespace tsigan {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'T', 'S', 'I', 'G', 'A', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary)
    {
        if (!out_) {
            throw CheckpointError("cannot open '" + path.string() + "' for writing");
        }
    }

    template <typename V>
    void put(V v)
    {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(V));
    }

    void put_string(const std::string& s)
    {
        put(std::uint32_t(s.size()));
        out_.write(s.data(), std::streamsize(s.size()));
    }

    void put_tensor(const std::string& name, const Tensor<float>& t)
    {
        put_string(name);
        put(std::uint32_t(t.rank()));
        for (int d : t.shape()) {
            put(std::int32_t(d));
        }
        out_.write(reinterpret_cast<const char*>(t.data()), std::streamsize(t.size() * sizeof(float)));
    }

    void finish(const std::filesystem::path& path)
    {
        out_.flush();
        if (!out_) {
            throw CheckpointError("write to '" + path.string() + "' failed");
        }
    }

private:
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path)
    {
        if (!in_) {
            throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
        }
    }

    template <typename V>
    V get()
    {
        V v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(V));
        check();
        return v;
    }

    std::string get_string()
    {
        const auto n = get<std::uint32_t>();
        if (n > (1u << 20)) {
            throw CheckpointError(path_.string() + ": implausible string length");
        }
        std::string s(n, '\0');
        in_.read(s.data(), std::streamsize(n));
        check();
        return s;
    }

    Tensor<float> get_tensor_body()
    {
        const auto rank = get<std::uint32_t>();
        if (rank > 8) {
            throw CheckpointError(path_.string() + ": implausible tensor rank");
        }
        Shape shape(rank);
        for (auto& d : shape) {
            d = get<std::int32_t>();
            if (d <= 0) {
                throw CheckpointError(path_.string() + ": non-positive tensor extent");
            }
        }
        std::vector<float> data(shape_size(shape));
        in_.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * sizeof(float)));
        check();
        return Tensor<float>(std::move(shape), std::move(data));
    }

    void check()
    {
        if (!in_) {
            throw CheckpointError(path_.string() + ": truncated checkpoint");
        }
    }

private:
    std::ifstream in_;
    std::filesystem::path path_;
};

std::map<std::string, Tensor<float>> named_tensors(const Network<float>& net)
{
    std::map<std::string, Tensor<float>> out;
    for (std::size_t i = 0; i < net.layer_params().size(); ++i) {
        const std::string prefix = net.name() + "." + std::to_string(i) + ".";
        const auto& p = net.layer_params()[i];
        out[prefix + "weight"] = p.weight.value();
        out[prefix + "bias"] = p.bias.value();
        if (p.gamma.defined()) {
            out[prefix + "gamma"] = p.gamma.value();
            out[prefix + "beta"] = p.beta.value();
        }
        if (!p.running_mean.empty()) {
            out[prefix + "running_mean"] = p.running_mean;
            out[prefix + "running_var"] = p.running_var;
        }
    }
    return out;
}

void write_network(Writer& w, const Network<float>& net)
{
    w.put_string(net.name());
    w.put(std::uint32_t(net.input_shape().size()));
    for (int d : net.input_shape()) {
        w.put(std::int32_t(d));
    }
    w.put(std::uint32_t(net.layers().size()));
    for (const LayerSpec& s : net.layers()) {
        for (std::int32_t v : {std::int32_t(s.kind), std::int32_t(s.kernel_h), std::int32_t(s.kernel_w),
                               std::int32_t(s.stride_h), std::int32_t(s.stride_w),
                               std::int32_t(s.in_units), std::int32_t(s.units), std::int32_t(s.norm),
                               std::int32_t(s.activation)}) {
            w.put(v);
        }
    }
    const auto tensors = named_tensors(net);
    w.put(std::uint32_t(tensors.size()));
    for (const auto& [name, t] : tensors) {
        w.put_tensor(name, t);
    }
}

template <typename E>
E checked_enum(std::int32_t v, std::int32_t max, const char* what)
{
    if (v < 0 || v > max) {
        throw CheckpointError(std::string("invalid ") + what + " code " + std::to_string(v));
    }
    return static_cast<E>(v);
}

Network<float> read_network(Reader& r)
{
    std::string name = r.get_string();
    Shape input(r.get<std::uint32_t>());
    for (auto& d : input) {
        d = r.get<std::int32_t>();
    }
    std::vector<LayerSpec> layers(r.get<std::uint32_t>());
    for (LayerSpec& s : layers) {
        s.kind = checked_enum<LayerKind>(r.get<std::int32_t>(), 2, "layer kind");
        s.kernel_h = r.get<std::int32_t>();
        s.kernel_w = r.get<std::int32_t>();
        s.stride_h = r.get<std::int32_t>();
        s.stride_w = r.get<std::int32_t>();
        s.in_units = r.get<std::int32_t>();
        s.units = r.get<std::int32_t>();
        s.norm = checked_enum<Norm>(r.get<std::int32_t>(), 2, "normalization");
        s.activation = checked_enum<Activation>(r.get<std::int32_t>(), 3, "activation");
    }
    Network<float> net(name, input, layers);

    std::map<std::string, Tensor<float>> stored;
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string tname = r.get_string();
        stored[tname] = r.get_tensor_body();
    }
    auto expected = named_tensors(net);
    if (stored.size() != expected.size()) {
        throw CheckpointError(name + ": expected " + std::to_string(expected.size()) +
                              " tensors, found " + std::to_string(stored.size()));
    }
    auto take = [&](const std::string& key, const Shape& shape) {
        auto it = stored.find(key);
        if (it == stored.end() || it->second.shape() != shape) {
            throw CheckpointError(name + ": missing or misshapen tensor '" + key + "'");
        }
        return it->second;
    };
    for (std::size_t i = 0; i < net.layer_params().size(); ++i) {
        const std::string prefix = name + "." + std::to_string(i) + ".";
        auto& p = net.layer_params()[i];
        p.weight.mutable_value() = take(prefix + "weight", p.weight.shape());
        p.bias.mutable_value() = take(prefix + "bias", p.bias.shape());
        if (p.gamma.defined()) {
            p.gamma.mutable_value() = take(prefix + "gamma", p.gamma.shape());
            p.beta.mutable_value() = take(prefix + "beta", p.beta.shape());
        }
        if (!p.running_mean.empty()) {
            p.running_mean = take(prefix + "running_mean", p.running_mean.shape());
            p.running_var = take(prefix + "running_var", p.running_var.shape());
        }
    }
    return net;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& model,
                     const CheckpointMeta& meta)
{
    Writer w(path);
    for (char c : kMagic) {
        w.put(c);
    }
    w.put(kVersion);
    w.put(std::uint32_t(model.z_dim));
    w.put(meta.window_size);
    w.put(meta.step);
    w.put(meta.seed);
    w.put(std::uint32_t(4));
    for (const Network<float>* net : {&model.encoder, &model.decoder, &model.critic_x, &model.critic_z}) {
        write_network(w, *net);
    }
    w.finish(path);
}

ModelParams load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta)
{
    Reader r(path);
    for (char c : kMagic) {
        if (r.get<char>() != c) {
            throw CheckpointError("'" + path.string() + "' is not a tsigan checkpoint");
        }
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    ModelParams m;
    m.z_dim = int(r.get<std::uint32_t>());
    CheckpointMeta stored;
    stored.window_size = r.get<std::uint32_t>();
    stored.step = r.get<std::uint32_t>();
    stored.seed = r.get<std::uint64_t>();
    if (r.get<std::uint32_t>() != 4) {
        throw CheckpointError("checkpoint must hold exactly four networks");
    }
    for (Network<float>* net : {&m.encoder, &m.decoder, &m.critic_x, &m.critic_z}) {
        *net = read_network(r);
    }
    if (m.encoder.name() != "encoder" || m.decoder.name() != "decoder" ||
        m.critic_x.name() != "critic_x" || m.critic_z.name() != "critic_z") {
        throw CheckpointError("unexpected network order in checkpoint");
    }
    if (meta) {
        *meta = stored;
    }
    return m;
}

} // namespace tsigan
