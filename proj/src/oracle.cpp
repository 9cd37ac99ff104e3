#include "splitcp/oracle.hpp"

namespace splitcp {

std::vector<Assignment> enumerate_all(const Model& m, const OracleOptions& opts) {
    const std::int64_t n = m.var_count();
    std::vector<std::vector<std::int64_t>> values;
    values.reserve(static_cast<std::size_t>(n));
    std::uint64_t product = 1;
    for (const auto& arr : m.vars) {
        for (std::int64_t i = 0; i < arr.length; ++i) {
            values.push_back(arr.domain.values());
            const std::uint64_t sz = values.back().size();
            if (sz == 0) throw ModelError("oracle: empty declared domain");
            if (product > opts.max_product / sz)
                throw ModelError("oracle: assignment space exceeds cap of " +
                                 std::to_string(opts.max_product));
            product *= sz;
        }
    }

    std::vector<Assignment> out;
    Assignment a;
    a.values.resize(static_cast<std::size_t>(n));
    std::vector<std::size_t> odo(static_cast<std::size_t>(n), 0);
    for (std::int64_t i = 0; i < n; ++i)
        a.values[static_cast<std::size_t>(i)] = values[static_cast<std::size_t>(i)][0];

    while (true) {
        if (eval_model(m, a)) out.push_back(a);
        // advance the odometer, last variable fastest
        std::int64_t pos = n - 1;
        while (pos >= 0) {
            auto p = static_cast<std::size_t>(pos);
            if (++odo[p] < values[p].size()) {
                a.values[p] = values[p][odo[p]];
                break;
            }
            odo[p] = 0;
            a.values[p] = values[p][0];
            --pos;
        }
        if (pos < 0) break;
    }
    return out;
}

}  // namespace splitcp
