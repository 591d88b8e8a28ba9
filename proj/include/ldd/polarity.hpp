#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ldd {

enum class Polarity { Positive, Negative };

inline std::string to_string(Polarity p) {
    return p == Polarity::Positive ? "positive" : "negative";
}

inline Polarity polarity_from_string(std::string_view s) {
    if (s == "positive") return Polarity::Positive;
    if (s == "negative") return Polarity::Negative;
    throw std::invalid_argument("unknown polarity: " + std::string(s));
}

inline Polarity opposite(Polarity p) {
    return p == Polarity::Positive ? Polarity::Negative : Polarity::Positive;
}

}  // namespace ldd
