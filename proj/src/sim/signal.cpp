#include "pimnet/signal.hpp"

#include <cmath>

#include "json.hpp"
#include "pimnet/detail/binary.hpp"
#include "pimnet/errors.hpp"

namespace pimnet::sim {

ComplexSignal ComplexSignal::zeros(std::size_t antennas, std::size_t length)
{
    ComplexSignal s;
    s.antennas = antennas;
    s.length = length;
    s.data.assign(antennas * length * 2, 0.0);
    return s;
}

double ComplexSignal::mean_power(std::size_t a) const
{
    double acc = 0.0;
    const double* p = data.data() + a * length * 2;
    for (std::size_t i = 0; i < length * 2; ++i) acc += p[i] * p[i];
    return acc / static_cast<double>(length);
}

bool ComplexSignal::all_finite() const
{
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor ComplexSignal::to_channels() const { return to_channels(0, length); }

Tensor ComplexSignal::to_channels(std::size_t begin, std::size_t end) const
{
    if (begin >= end || end > length)
        throw ShapeError("to_channels: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside signal of length " + std::to_string(length));
    const std::size_t L = end - begin;
    Tensor t({2 * antennas, L});
    for (std::size_t a = 0; a < antennas; ++a) {
        const double* src = data.data() + (a * length + begin) * 2;
        double* re = t.ptr() + (2 * a) * L;
        double* im = t.ptr() + (2 * a + 1) * L;
        for (std::size_t n = 0; n < L; ++n) {
            re[n] = src[2 * n];
            im[n] = src[2 * n + 1];
        }
    }
    return t;
}

ComplexSignal ComplexSignal::from_channels(const Tensor& t)
{
    if (t.rank() != 2 || t.dim(0) % 2 != 0)
        throw ShapeError("from_channels: expected [2*antennas, T], got " + shape_str(t.shape()));
    ComplexSignal s = zeros(t.dim(0) / 2, t.dim(1));
    for (std::size_t a = 0; a < s.antennas; ++a)
        for (std::size_t n = 0; n < s.length; ++n) s.set(a, n, {t.at(2 * a, n), t.at(2 * a + 1, n)});
    return s;
}

std::string encode_pims(const ComplexSignal& signal, const SignalHeader& header)
{
    if (signal.data.size() != signal.antennas * signal.length * 2)
        throw ShapeError("encode_pims: data size does not match antennas x length");
    if (!signal.all_finite()) throw NumericError("encode_pims: signal contains non-finite samples");
    nlohmann::json h;
    h["antennas"] = signal.antennas;
    h["length"] = signal.length;
    h["role"] = header.role;
    h["scenario_hash"] = header.scenario_hash;
    h["seed"] = header.seed;

    detail::ByteWriter w;
    w.bytes("PIMS");
    w.put<std::uint32_t>(kSignalVersion);
    w.u32_string(h.dump());
    for (double v : signal.data) w.put<float>(static_cast<float>(v));
    return w.str();
}

ComplexSignal decode_pims(const std::string& bytes, SignalHeader* header, const std::string& origin)
{
    detail::ByteReader r(bytes, origin);
    if (r.bytes(4) != "PIMS") throw IoError(origin + ": not a PIMS signal file (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kSignalVersion) throw IoError(origin + ": unsupported PIMS version " + std::to_string(version));
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(r.u32_string());
    } catch (const nlohmann::json::exception& e) {
        throw IoError(origin + ": bad PIMS header: " + e.what());
    }
    ComplexSignal s;
    try {
        s.antennas = h.at("antennas").get<std::size_t>();
        s.length = h.at("length").get<std::size_t>();
        if (header) {
            header->role = h.at("role").get<std::string>();
            header->scenario_hash = h.at("scenario_hash").get<std::string>();
            header->seed = h.at("seed").get<std::uint64_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(origin + ": bad PIMS header: " + e.what());
    }
    const std::size_t n = s.antennas * s.length * 2;
    if (r.remaining() != n * sizeof(float))
        throw IoError(origin + ": payload has " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(n * sizeof(float)));
    s.data.resize(n);
    for (auto& v : s.data) v = static_cast<double>(r.get<float>());
    return s;
}

void save_pims(const std::string& path, const ComplexSignal& signal, const SignalHeader& header)
{
    detail::write_file(path, encode_pims(signal, header));
}

ComplexSignal load_pims(const std::string& path, SignalHeader* header)
{
    return decode_pims(detail::read_file(path), header, path);
}

} // namespace pimnet::sim
