#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pimnet/tensor.hpp"

namespace pimnet::sim {

/// Multi-antenna complex baseband signal, stored antenna-major with I/Q
/// interleaved: data[(a * length + n) * 2 + {0: I, 1: Q}].
struct ComplexSignal {
    std::size_t antennas = 0;
    std::size_t length = 0;
    std::vector<double> data;

    static ComplexSignal zeros(std::size_t antennas, std::size_t length);

    std::complex<double> at(std::size_t a, std::size_t n) const
    {
        const std::size_t i = (a * length + n) * 2;
        return {data[i], data[i + 1]};
    }
    void set(std::size_t a, std::size_t n, std::complex<double> v)
    {
        const std::size_t i = (a * length + n) * 2;
        data[i] = v.real();
        data[i + 1] = v.imag();
    }

    double mean_power(std::size_t a) const;
    bool all_finite() const;

    /// [2 * antennas, length]; row 2a is I of antenna a, row 2a+1 is Q.
    Tensor to_channels() const;
    Tensor to_channels(std::size_t begin, std::size_t end) const;
    static ComplexSignal from_channels(const Tensor& channels);
};

struct SignalHeader {
    std::string role;           ///< "tx" or "pim"
    std::string scenario_hash;
    std::uint64_t seed = 0;
};

inline constexpr std::uint32_t kSignalVersion = 1;

/// "PIMS" container:
///   magic "PIMS" | u32 version | u32 len + canonical JSON
///   {"antennas","length","role","scenario_hash","seed"} |
///   f32 data, antenna-major, I/Q interleaved. Little-endian throughout.
std::string encode_pims(const ComplexSignal& signal, const SignalHeader& header);
ComplexSignal decode_pims(const std::string& bytes, SignalHeader* header = nullptr,
                          const std::string& origin = "<memory>");

void save_pims(const std::string& path, const ComplexSignal& signal, const SignalHeader& header);
ComplexSignal load_pims(const std::string& path, SignalHeader* header = nullptr);

} // namespace pimnet::sim
