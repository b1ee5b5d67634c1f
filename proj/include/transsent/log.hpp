#ifndef TRANSSENT_LOG_HPP
#define TRANSSENT_LOG_HPP

#include <iostream>
#include <string_view>

namespace transsent {

inline void log_warn(std::string_view msg) { std::cerr << "warning: " << msg << "\n"; }
inline void log_info(std::string_view msg) { std::cerr << msg << "\n"; }

}  // namespace transsent

#endif  // TRANSSENT_LOG_HPP
