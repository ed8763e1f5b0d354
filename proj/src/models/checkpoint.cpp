#include "pimnet/checkpoint.hpp"

#include "pimnet/detail/binary.hpp"
#include "pimnet/errors.hpp"

namespace pimnet::models {

namespace {

void put_tensors(detail::ByteWriter& w, const std::vector<NamedTensor>& tensors)
{
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        w.u32_string(name);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) w.put<std::uint64_t>(d);
        for (double v : t.data()) w.put<double>(v);
    }
}

std::vector<NamedTensor> get_tensors(detail::ByteReader& r)
{
    const auto count = r.get<std::uint32_t>();
    std::vector<NamedTensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.u32_string();
        const auto rank = r.get<std::uint32_t>();
        if (rank == 0 || rank > 8) throw IoError(r.what() + ": tensor '" + name + "' has invalid rank");
        Shape shape(rank);
        std::size_t n = 1;
        for (auto& d : shape) {
            d = static_cast<std::size_t>(r.get<std::uint64_t>());
            if (d == 0) throw IoError(r.what() + ": tensor '" + name + "' has a zero dimension");
            n *= d;
        }
        if (n * sizeof(double) > r.remaining())
            throw IoError(r.what() + ": tensor '" + name + "' extends past end of file");
        std::vector<double> data(n);
        for (auto& v : data) v = r.get<double>();
        out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
    }
    return out;
}

} // namespace

std::string encode_checkpoint(const ModelSpec& spec, const ModelParams& params, const CheckpointAppendix* appendix)
{
    detail::ByteWriter w;
    w.bytes("PIMM");
    w.put<std::uint32_t>(kCheckpointVersion);
    w.u32_string(spec_to_json(spec));
    put_tensors(w, params.entries());
    if (appendix) {
        w.bytes("OPTS");
        w.u32_string(appendix->meta_json);
        put_tensors(w, appendix->tensors);
    }
    return w.str();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin)
{
    detail::ByteReader r(bytes, origin);
    if (r.bytes(4) != "PIMM") throw IoError(origin + ": not a PIMM checkpoint (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw IoError(origin + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.spec = spec_from_json(r.u32_string());
    for (auto& nt : get_tensors(r)) ck.params.add(std::move(nt.name), std::move(nt.tensor));

    // The tensors must be exactly what build() would allocate for this spec.
    const ModelParams expected = build(ck.spec, 0);
    if (expected.size() != ck.params.size())
        throw IoError(origin + ": tensor count does not match the stored model spec");
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& e = expected.entries()[i];
        const auto& g = ck.params.entries()[i];
        if (e.name != g.name || e.tensor.shape() != g.tensor.shape())
            throw IoError(origin + ": tensor '" + g.name + "' does not match expected '" + e.name + "' " +
                          shape_str(e.tensor.shape()));
    }

    if (!r.at_end()) {
        if (r.bytes(4) != "OPTS") throw IoError(origin + ": unexpected trailing data");
        CheckpointAppendix app;
        app.meta_json = r.u32_string();
        app.tensors = get_tensors(r);
        ck.appendix = std::move(app);
        if (!r.at_end()) throw IoError(origin + ": unexpected trailing data after appendix");
    }
    return ck;
}

void save_checkpoint(const std::string& path, const ModelSpec& spec, const ModelParams& params,
                     const CheckpointAppendix* appendix)
{
    detail::write_file(path, encode_checkpoint(spec, params, appendix));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path), path); }

} // namespace pimnet::models
