#pragma once

#include <cstddef>
#include <new>
#include <vector>

namespace pimnet::detail {

/// Cache-line aligned allocation. Vectorised kernels peel a different number
/// of leading elements depending on the address, which changes rounding; a
/// fixed alignment makes results independent of where the heap put a buffer.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    template <class U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept
    {
    }

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align})); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{Align}); }

    template <class U>
    bool operator==(const AlignedAllocator<U, Align>&) const noexcept
    {
        return true;
    }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

} // namespace pimnet::detail
