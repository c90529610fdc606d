#include "poet/vsim/value.hpp"

#include <algorithm>

namespace poet::vsim {

namespace {

/// Groups bits `bits_per_digit` at a time, LSB first, and renders each group.
std::string format_radix(const Value& v, unsigned bits_per_digit, bool pad)
{
    const unsigned digits = std::max(1u, (v.width + bits_per_digit - 1) / bits_per_digit);
    std::string out;
    for (unsigned d = digits; d-- > 0;) {
        const unsigned lo = d * bits_per_digit;
        const unsigned hi = std::min(v.width, lo + bits_per_digit);
        unsigned x = 0, z = 0, n = hi - lo;
        unsigned value = 0;
        for (unsigned b = lo; b < hi; ++b) {
            char c = v.bit(b);
            if (c == 'x')
                ++x;
            else if (c == 'z')
                ++z;
            else if (c == '1')
                value |= 1u << (b - lo);
        }
        char ch;
        if (x == n)
            ch = 'x';
        else if (z == n)
            ch = 'z';
        else if (x > 0)
            ch = 'X';
        else if (z > 0)
            ch = 'Z';
        else
            ch = "0123456789abcdef"[value];
        out.push_back(ch);
    }
    if (!pad) {
        std::size_t first = out.find_first_not_of('0');
        if (first == std::string::npos)
            return "0";
        out.erase(0, first);
    }
    return out;
}

}  // namespace

std::string format_hex(const Value& v, bool pad) { return format_radix(v, 4, pad); }
std::string format_bin(const Value& v, bool pad) { return format_radix(v, 1, pad); }
std::string format_oct(const Value& v, bool pad) { return format_radix(v, 3, pad); }

std::string format_dec(const Value& v, bool pad)
{
    std::string out;
    if (!v.fully_known()) {
        const std::uint64_t m = Value::mask(v.width);
        const bool all_unknown = (v.unk & m) == m;
        const bool all_z = all_unknown && (v.val & m) == m;
        if (all_z)
            out = "z";
        else if (all_unknown && (v.val & m) == 0)
            out = "x";
        else
            out = (v.val & v.unk) ? "Z" : "X";
    } else {
        out = std::to_string(v.val & Value::mask(v.width));
    }
    if (pad) {
        const std::size_t w = std::to_string(Value::mask(v.width)).size();
        if (out.size() < w)
            out.insert(0, w - out.size(), ' ');
    }
    return out;
}

}  // namespace poet::vsim
