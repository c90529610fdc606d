#pragma once

#include <cstdint>
#include <string>

namespace poet::vsim {

inline constexpr unsigned kMaxWidth = 64;

/// Four-state bit vector of up to 64 bits. A bit is unknown when its `unk` bit is set;
/// an unknown bit with `val` set is Z, otherwise X.
struct Value {
    unsigned width = 1;
    std::uint64_t val = 0;
    std::uint64_t unk = 0;

    static std::uint64_t mask(unsigned w) { return w >= 64 ? ~0ULL : ((1ULL << w) - 1); }
    static Value known(unsigned w, std::uint64_t v) { return Value{w, v & mask(w), 0}; }
    static Value all_x(unsigned w) { return Value{w, 0, mask(w)}; }
    static Value all_z(unsigned w) { return Value{w, mask(w), mask(w)}; }

    bool fully_known() const { return unk == 0; }
    bool has_known_one() const { return (val & ~unk & mask(width)) != 0; }
    bool is_zero() const { return unk == 0 && (val & mask(width)) == 0; }

    /// Zero-extends or truncates.
    Value resized(unsigned w) const
    {
        return Value{w, val & mask(w), unk & mask(w)};
    }

    bool identical(const Value& o) const
    {
        return width == o.width && (val & mask(width)) == (o.val & mask(o.width)) &&
               (unk & mask(width)) == (o.unk & mask(o.width));
    }

    /// Bit i as one of '0', '1', 'x', 'z'.
    char bit(unsigned i) const
    {
        bool u = (unk >> i) & 1ULL;
        bool v = (val >> i) & 1ULL;
        if (u)
            return v ? 'z' : 'x';
        return v ? '1' : '0';
    }
};

/// Formatting used by %h, %b, %o, %d in $display.
std::string format_hex(const Value& v, bool pad);
std::string format_bin(const Value& v, bool pad);
std::string format_oct(const Value& v, bool pad);
std::string format_dec(const Value& v, bool pad);

}  // namespace poet::vsim
