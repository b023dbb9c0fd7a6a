#pragma once

#include <execsim/market/kernel.hpp>
#include <execsim/util/hash.hpp>

#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

namespace execsim::market {

// Wide snapshot rows: ts, then (px, qty) per bid level, then per ask level.
// Missing levels are left empty.
inline void write_snapshots_csv(std::ostream& os, const SessionLog& log, int depth, std::string_view config_hash) {
  os << config_hash_line(config_hash) << "ts";
  for (int i = 1; i <= depth; ++i) os << ",bid_px_" << i << ",bid_qty_" << i;
  for (int i = 1; i <= depth; ++i) os << ",ask_px_" << i << ",ask_qty_" << i;
  os << '\n';
  auto levels = [&](const std::vector<lob::LevelView>& side) {
    for (int i = 0; i < depth; ++i) {
      if (i < static_cast<int>(side.size())) {
        os << ',' << side[static_cast<std::size_t>(i)].price << ',' << side[static_cast<std::size_t>(i)].qty;
      } else {
        os << ",,";
      }
    }
  };
  for (const auto& s : log.snapshots) {
    os << s.ts;
    levels(s.bids);
    levels(s.asks);
    os << '\n';
  }
}

inline void write_fills_csv(std::ostream& os, const SessionLog& log, std::string_view config_hash) {
  os << config_hash_line(config_hash)
     << "ts,taker_order_id,maker_order_id,taker_agent_id,maker_agent_id,taker_side,price,qty\n";
  for (const auto& f : log.fills) {
    os << f.ts << ',' << f.taker_order_id << ',' << f.maker_order_id << ',' << f.taker_agent_id << ','
       << f.maker_agent_id << ',' << lob::to_string(f.taker_side) << ',' << f.price << ',' << f.qty << '\n';
  }
}

inline void write_fundamental_csv(std::ostream& os, const SessionLog& log, std::string_view config_hash) {
  os << config_hash_line(config_hash) << "ts,value\n";
  char buf[32];
  for (const auto& s : log.fundamental) {
    std::snprintf(buf, sizeof buf, "%.17g", s.value);
    os << s.ts << ',' << buf << '\n';
  }
}

// Digest over the full CSV rendering; equal logs give equal digests.
inline std::uint64_t session_digest(const SessionLog& log, int depth) {
  std::ostringstream os;
  write_snapshots_csv(os, log, depth, "");
  write_fills_csv(os, log, "");
  write_fundamental_csv(os, log, "");
  return fnv1a64(os.str());
}

}  // namespace execsim::market
