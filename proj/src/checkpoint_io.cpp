#include "spearmm/checkpoint_io.hpp"

#include "spearmm/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>

namespace spearmm {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kMaxHeaderBytes = 100ull << 20;

std::uint64_t read_le64(const std::uint8_t * p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

void write_le64(std::vector<std::uint8_t> & out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

void decode(const std::uint8_t * src, DType dtype, std::vector<float> & dst) {
    switch (dtype) {
        case DType::f32:
            for (std::size_t i = 0; i < dst.size(); ++i) {
                std::uint32_t u = 0;
                for (int b = 3; b >= 0; --b) u = (u << 8) | src[4 * i + b];
                dst[i] = std::bit_cast<float>(u);
            }
            break;
        case DType::f16:
        case DType::bf16:
            for (std::size_t i = 0; i < dst.size(); ++i) {
                const auto u = static_cast<std::uint16_t>(src[2 * i] | (src[2 * i + 1] << 8));
                dst[i] = dtype == DType::f16 ? half_to_float(u) : bf16_to_float(u);
            }
            break;
    }
}

void encode(const std::vector<float> & src, DType dtype, std::vector<std::uint8_t> & out) {
    for (float f : src) {
        if (dtype == DType::f32) {
            const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
            for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
        } else {
            const std::uint16_t u = dtype == DType::f16 ? float_to_half(f) : float_to_bf16(f);
            out.push_back(static_cast<std::uint8_t>(u));
            out.push_back(static_cast<std::uint8_t>(u >> 8));
        }
    }
}

bool legal_name(const std::string & name) {
    if (name.empty() || name == "__metadata__") return false;
    return std::none_of(name.begin(), name.end(), [](char c) {
        return static_cast<unsigned char>(c) < 0x20 || c == 0x7f;
    });
}

} // namespace

std::size_t TensorRecord::numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, std::int64_t d) { return a * static_cast<std::size_t>(d); });
}

MatrixView TensorRecord::matrix() const {
    MatrixView v{data, 1, data.size()};
    if (shape.size() >= 2) {
        v.rows = static_cast<std::size_t>(shape[0]);
        v.cols = data.size() / std::max<std::size_t>(v.rows, 1);
    }
    return v;
}

void Checkpoint::add(TensorRecord t) {
    const std::string key = t.name;
    if (!tensors.emplace(key, std::move(t)).second) {
        throw ValidationError("duplicate tensor name '" + key + "'");
    }
}

const TensorRecord * Checkpoint::find(const std::string & name) const {
    auto it = tensors.find(name);
    return it == tensors.end() ? nullptr : &it->second;
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8) {
        throw ParseError("", "file shorter than the 8-byte header length");
    }
    const std::uint64_t n = read_le64(bytes.data());
    if (n > kMaxHeaderBytes || n > bytes.size() - 8) {
        throw ParseError("", "header length " + std::to_string(n) + " exceeds file size");
    }
    const auto * hbeg = bytes.data() + 8;
    json header;
    try {
        header = json::parse(hbeg, hbeg + n);
    } catch (const json::exception & e) {
        throw ParseError("", std::string("header is not valid JSON: ") + e.what());
    }
    if (!header.is_object()) {
        throw ParseError("", "header is not a JSON object");
    }

    const std::uint8_t * buffer = hbeg + n;
    const std::uint64_t buffer_size = bytes.size() - 8 - n;

    Checkpoint ckpt;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    std::vector<std::string> span_names;

    for (const auto & [key, info] : header.items()) {
        if (key == "__metadata__") {
            if (!info.is_object()) throw ParseError("", "__metadata__ is not an object");
            for (const auto & [mk, mv] : info.items()) {
                if (!mv.is_string()) throw ParseError("", "metadata value for '" + mk + "' is not a string");
                ckpt.metadata[mk] = mv.get<std::string>();
            }
            continue;
        }
        if (!info.is_object() || !info.contains("dtype") || !info.contains("shape") ||
            !info.contains("data_offsets")) {
            throw ParseError(key, "entry lacks dtype/shape/data_offsets");
        }
        TensorRecord t;
        t.name = key;
        const auto & jd = info["dtype"];
        auto dtype = jd.is_string() ? parse_dtype(jd.get<std::string>()) : std::nullopt;
        if (!dtype) {
            throw ParseError(key, "unsupported dtype " + jd.dump());
        }
        t.dtype = *dtype;

        const auto & js = info["shape"];
        if (!js.is_array() || js.empty()) {
            throw ParseError(key, "shape must be a non-empty array");
        }
        std::uint64_t count = 1;
        for (const auto & d : js) {
            if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0) {
                throw ParseError(key, "shape entries must be positive integers");
            }
            const auto dim = d.get<std::uint64_t>();
            if (count > (std::uint64_t{1} << 40) / dim) throw ParseError(key, "shape too large");
            count *= dim;
            t.shape.push_back(static_cast<std::int64_t>(dim));
        }

        const auto & jo = info["data_offsets"];
        if (!jo.is_array() || jo.size() != 2 || !jo[0].is_number_unsigned() || !jo[1].is_number_unsigned()) {
            throw ParseError(key, "data_offsets must be [begin, end]");
        }
        const auto begin = jo[0].get<std::uint64_t>();
        const auto end = jo[1].get<std::uint64_t>();
        if (begin > end || end > buffer_size) {
            throw ParseError(key, "data span [" + std::to_string(begin) + ", " + std::to_string(end) +
                                      ") exceeds data buffer of " + std::to_string(buffer_size) + " bytes");
        }
        if (end - begin != count * dtype_size(t.dtype)) {
            throw ParseError(key, "data span length does not match shape and dtype");
        }
        spans.emplace_back(begin, end);
        span_names.push_back(key);

        t.data.resize(count);
        decode(buffer + begin, t.dtype, t.data);
        ckpt.tensors.emplace(key, std::move(t));
    }

    std::vector<std::size_t> order(spans.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return spans[a] < spans[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (spans[order[i]].first < spans[order[i - 1]].second) {
            throw ParseError(span_names[order[i]], "data span overlaps tensor '" + span_names[order[i - 1]] + "'");
        }
    }
    return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open checkpoint '" + path.string() + "'");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_checkpoint(bytes);
    } catch (const ParseError & e) {
        throw ParseError(e.tensor(), path.string() + ": " + e.what());
    }
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint & ckpt, DTypePolicy policy) {
    json header = json::object();
    std::vector<std::uint8_t> data;
    for (const auto & [name, t] : ckpt.tensors) {
        if (!legal_name(name) || name != t.name) {
            throw ValidationError("illegal tensor name '" + name + "'");
        }
        if (t.shape.empty() || t.numel() != t.data.size()) {
            throw ValidationError("tensor '" + name + "': shape does not match data length");
        }
        const DType dt = policy == DTypePolicy::force_f32 ? DType::f32 : t.dtype;
        const std::uint64_t begin = data.size();
        encode(t.data, dt, data);
        header[name] = {{"dtype", dtype_name(dt)}, {"shape", t.shape}, {"data_offsets", {begin, data.size()}}};
    }
    if (!ckpt.metadata.empty()) {
        header["__metadata__"] = ckpt.metadata;
    }

    std::string text;
    try {
        text = header.dump();
    } catch (const json::exception & e) {
        throw ValidationError(std::string("header cannot be encoded: ") + e.what());
    }
    while (text.size() % 8 != 0) {
        text.push_back(' ');
    }

    std::vector<std::uint8_t> out;
    out.reserve(8 + text.size() + data.size());
    write_le64(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), data.begin(), data.end());
    return out;
}

void save_checkpoint(const Checkpoint & ckpt, const std::filesystem::path & path, DTypePolicy policy) {
    const auto bytes = serialize_checkpoint(ckpt, policy);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InputError("cannot write checkpoint '" + path.string() + "'");
    }
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw InputError("write failed for '" + path.string() + "'");
    }
}

Alignment aligned_pairs(const Checkpoint & base, const Checkpoint & adapted) {
    Alignment al;
    auto bi = base.tensors.begin();
    auto ai = adapted.tensors.begin();
    while (bi != base.tensors.end() || ai != adapted.tensors.end()) {
        if (ai == adapted.tensors.end() || (bi != base.tensors.end() && bi->first < ai->first)) {
            al.unmatched.push_back(bi->first);
            ++bi;
        } else if (bi == base.tensors.end() || ai->first < bi->first) {
            al.unmatched.push_back(ai->first);
            ++ai;
        } else {
            if (bi->second.shape != ai->second.shape) {
                throw AlignmentError("tensor '" + bi->first + "' has different shapes in base and adapted");
            }
            al.pairs.push_back({&bi->second, &ai->second});
            ++bi;
            ++ai;
        }
    }
    return al;
}

} // namespace spearmm
