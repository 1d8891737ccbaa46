#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <tuple>

#include <tiffio.h>
#include <json.hpp>

#include <neuroqc/error.hpp>
#include <neuroqc/volume.hpp>

namespace neuroqc {

std::uint32_t max_value(voxel_type t) noexcept {
    return t == voxel_type::u8? 255u: 65535u;
}

std::string_view to_string(voxel_type t) noexcept {
    return t == voxel_type::u8? "u8": "u16";
}

std::int64_t round_half_away(double v) noexcept {
    return static_cast<std::int64_t>(std::llround(v));
}

volume::volume(dims3 dims, int3 origin, voxel_type type):
    volume(dims, origin, type, std::vector<std::uint16_t>(dims.count(), 0))
{}

volume::volume(dims3 dims, int3 origin, voxel_type type, std::vector<std::uint16_t> voxels):
    dims_(dims), origin_(origin), type_(type), voxels_(std::move(voxels))
{
    if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) {
        throw data_error("volume dimensions must be positive");
    }
    if (voxels_.size() != dims.count()) {
        throw data_error("voxel count " + std::to_string(voxels_.size())
            + " does not match dimensions (" + std::to_string(dims.count()) + ")");
    }
    if (type_ == voxel_type::u8) {
        auto too_big = std::find_if(voxels_.begin(), voxels_.end(), [](std::uint16_t v) { return v > 255; });
        if (too_big != voxels_.end()) throw data_error("u8 volume holds a value above 255");
    }
}

void volume::set(const int3& local, std::uint16_t v) {
    if (v > max_value()) throw data_error("voxel value exceeds type range");
    voxels_[dims_.linear(local)] = v;
}

std::size_t binary_map::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

using nlohmann::json;

bool has_tiff_extension(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".tif" || ext == ".tiff";
}

json read_json_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw io_error("cannot open " + p.string());
    try {
        return json::parse(in);
    }
    catch (const json::exception& e) {
        throw data_error(p.string() + ": " + e.what());
    }
}

int3 read_origin(const json& j) {
    if (!j.contains("origin")) return {};
    const auto& o = j.at("origin");
    if (!o.is_array() || o.size() != 3) throw data_error("sidecar 'origin' must be [x0,y0,z0]");
    return {o[0].get<std::int64_t>(), o[1].get<std::int64_t>(), o[2].get<std::int64_t>()};
}

volume load_raw(const std::filesystem::path& data_path, const std::filesystem::path& sidecar_path) {
    if (!std::filesystem::exists(sidecar_path)) {
        throw io_error("missing volume sidecar " + sidecar_path.string());
    }
    auto meta = read_json_file(sidecar_path);
    dims3 dims;
    voxel_type type;
    int3 origin;
    bool big_endian = false;
    try {
        const auto& d = meta.at("dims");
        if (!d.is_array() || d.size() != 3) throw data_error("sidecar 'dims' must be [nx,ny,nz]");
        for (const auto& v: d) {
            if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) throw data_error("sidecar dims must be positive integers");
        }
        dims = {d[0].get<std::size_t>(), d[1].get<std::size_t>(), d[2].get<std::size_t>()};
        auto dtype = meta.at("dtype").get<std::string>();
        if (dtype == "u8") type = voxel_type::u8;
        else if (dtype == "u16") type = voxel_type::u16;
        else throw data_error("unsupported voxel dtype '" + dtype + "'");
        origin = read_origin(meta);
        auto endian = meta.value("endianness", std::string("little"));
        if (endian == "big") big_endian = true;
        else if (endian != "little") throw data_error("unsupported endianness '" + endian + "'");
    }
    catch (const json::exception& e) {
        throw data_error(sidecar_path.string() + ": " + e.what());
    }

    const std::size_t bytes_per_voxel = type == voxel_type::u8? 1: 2;
    std::error_code ec;
    const auto file_size = std::filesystem::file_size(data_path, ec);
    if (ec) throw io_error("cannot stat " + data_path.string());
    if (file_size != dims.count()*bytes_per_voxel) {
        throw data_error(data_path.string() + ": file holds " + std::to_string(file_size)
            + " bytes but dims/dtype require " + std::to_string(dims.count()*bytes_per_voxel));
    }

    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw io_error("cannot open " + data_path.string());
    std::vector<unsigned char> raw(file_size);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw io_error("short read on " + data_path.string());

    std::vector<std::uint16_t> voxels(dims.count());
    if (type == voxel_type::u8) {
        std::copy(raw.begin(), raw.end(), voxels.begin());
    }
    else {
        for (std::size_t i = 0; i < voxels.size(); ++i) {
            const unsigned lo = raw[2*i + (big_endian? 1: 0)], hi = raw[2*i + (big_endian? 0: 1)];
            voxels[i] = static_cast<std::uint16_t>(lo | (hi << 8));
        }
    }
    volume v(dims, origin, type, std::move(voxels));
    v.set_name(data_path.filename().string());
    return v;
}

// libtiff reports through global handlers; keep the last message per thread
// so failures can be surfaced in exceptions.
thread_local std::string tiff_last_error;

void tiff_error_handler(const char* module, const char* fmt, va_list ap) {
    char buf[512];
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    tiff_last_error = (module? std::string(module) + ": ": std::string()) + buf;
}

void tiff_warning_handler(const char*, const char*, va_list) {}

struct tiff_handlers {
    tiff_handlers() {
        TIFFSetErrorHandler(tiff_error_handler);
        TIFFSetWarningHandler(tiff_warning_handler);
    }
};

struct tiff_closer {
    void operator()(TIFF* t) const noexcept { if (t) TIFFClose(t); }
};
using tiff_ptr = std::unique_ptr<TIFF, tiff_closer>;

tiff_ptr open_tiff(const std::filesystem::path& path, const char* mode) {
    static tiff_handlers install;
    tiff_last_error.clear();
    tiff_ptr t(TIFFOpen(path.c_str(), mode));
    if (!t) throw io_error("cannot open TIFF " + path.string() + (tiff_last_error.empty()? "": " (" + tiff_last_error + ")"));
    return t;
}

void read_tiff_page(TIFF* tif, std::uint32_t width, std::uint32_t height, unsigned bits,
                    std::uint16_t* slice, const std::string& where)
{
    const std::size_t bytes_per_sample = bits/8;
    auto store = [&](const unsigned char* src, std::uint32_t x0, std::uint32_t y, std::uint32_t count) {
        for (std::uint32_t i = 0; i < count; ++i) {
            std::uint16_t v;
            if (bits == 8) v = src[i];
            else std::memcpy(&v, src + 2*i, 2);     // libtiff hands back native byte order
            slice[static_cast<std::size_t>(y)*width + x0 + i] = v;
        }
    };

    if (TIFFIsTiled(tif)) {
        std::uint32_t tw = 0, th = 0;
        TIFFGetField(tif, TIFFTAG_TILEWIDTH, &tw);
        TIFFGetField(tif, TIFFTAG_TILELENGTH, &th);
        std::vector<unsigned char> tile(TIFFTileSize(tif));
        for (std::uint32_t ty = 0; ty < height; ty += th) {
            for (std::uint32_t tx = 0; tx < width; tx += tw) {
                if (TIFFReadTile(tif, tile.data(), tx, ty, 0, 0) < 0) {
                    throw data_error(where + ": cannot read tile (" + tiff_last_error + ")");
                }
                const auto cols = std::min(tw, width - tx);
                for (std::uint32_t r = 0; r < th && ty + r < height; ++r) {
                    store(tile.data() + static_cast<std::size_t>(r)*tw*bytes_per_sample, tx, ty + r, cols);
                }
            }
        }
        return;
    }

    std::vector<unsigned char> line(TIFFScanlineSize(tif));
    for (std::uint32_t y = 0; y < height; ++y) {
        if (TIFFReadScanline(tif, line.data(), y, 0) < 0) {
            throw data_error(where + ": cannot read scanline " + std::to_string(y) + " (" + tiff_last_error + ")");
        }
        store(line.data(), 0, y, width);
    }
}

volume load_tiff(const std::filesystem::path& path) {
    auto tif = open_tiff(path, "r");
    std::uint32_t width = 0, height = 0;
    unsigned bits_seen = 0;
    std::vector<std::uint16_t> voxels;
    std::size_t pages = 0;
    do {
        std::uint32_t w = 0, h = 0;
        std::uint16_t bits = 0, spp = 1, format = SAMPLEFORMAT_UINT;
        TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
        TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
        TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bits);
        TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
        TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &format);
        const auto where = path.string() + " page " + std::to_string(pages);
        if (bits != 8 && bits != 16) throw data_error(where + ": unsupported bit depth " + std::to_string(bits));
        if (spp != 1) throw data_error(where + ": expected one sample per pixel, found " + std::to_string(spp));
        if (format != SAMPLEFORMAT_UINT) throw data_error(where + ": only unsigned integer samples are supported");
        if (pages == 0) {
            width = w;
            height = h;
            bits_seen = bits;
        }
        else if (w != width || h != height || bits != bits_seen) {
            throw data_error(where + ": page geometry or bit depth differs from the first page");
        }
        voxels.resize(voxels.size() + static_cast<std::size_t>(width)*height);
        read_tiff_page(tif.get(), width, height, bits,
                       voxels.data() + pages*static_cast<std::size_t>(width)*height, where);
        ++pages;
    } while (TIFFReadDirectory(tif.get()));

    int3 origin;
    auto sidecar = std::filesystem::path(path).replace_extension(".json");
    if (std::filesystem::exists(sidecar)) origin = read_origin(read_json_file(sidecar));

    volume v({width, height, pages}, origin, bits_seen == 8? voxel_type::u8: voxel_type::u16, std::move(voxels));
    v.set_name(path.filename().string());
    return v;
}

} // anonymous namespace

volume load_volume(const std::filesystem::path& path) {
    if (has_tiff_extension(path)) return load_tiff(path);
    if (path.extension() == ".json") {
        return load_raw(std::filesystem::path(path).replace_extension(".raw"), path);
    }
    return load_raw(path, std::filesystem::path(path).replace_extension(".json"));
}

std::filesystem::path save_volume_raw(const std::filesystem::path& path, const volume& v) {
    auto data_path = std::filesystem::path(path).replace_extension(".raw");
    auto sidecar = std::filesystem::path(path).replace_extension(".json");

    std::vector<unsigned char> raw;
    if (v.type() == voxel_type::u8) {
        raw.assign(v.voxels().begin(), v.voxels().end());
    }
    else {
        raw.reserve(2*v.voxels().size());
        for (auto s: v.voxels()) {
            raw.push_back(static_cast<unsigned char>(s & 0xff));
            raw.push_back(static_cast<unsigned char>(s >> 8));
        }
    }
    {
        std::ofstream out(data_path, std::ios::binary);
        if (!out) throw io_error("cannot create " + data_path.string());
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!out) throw io_error("write failure on " + data_path.string());
    }

    json meta = {
        {"dims", {v.dims().nx, v.dims().ny, v.dims().nz}},
        {"dtype", to_string(v.type())},
        {"origin", {v.origin().x, v.origin().y, v.origin().z}},
        {"endianness", "little"},
    };
    std::ofstream out(sidecar, std::ios::binary);
    if (!out) throw io_error("cannot create " + sidecar.string());
    out << meta.dump() << '\n';
    if (!out) throw io_error("write failure on " + sidecar.string());
    return sidecar;
}

void save_volume_tiff(const std::filesystem::path& path, const volume& v) {
    auto tif = open_tiff(path, "w");
    const auto& d = v.dims();
    const unsigned bits = v.type() == voxel_type::u8? 8: 16;
    std::vector<unsigned char> line(d.nx*(bits/8));
    for (std::size_t z = 0; z < d.nz; ++z) {
        TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(d.nx));
        TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(d.ny));
        TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, bits);
        TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, 1);
        TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_UINT);
        TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
        TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
        TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, COMPRESSION_NONE);
        TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(d.ny));
        TIFFSetField(tif.get(), TIFFTAG_SUBFILETYPE, FILETYPE_PAGE);
        TIFFSetField(tif.get(), TIFFTAG_PAGENUMBER, static_cast<std::uint16_t>(z), static_cast<std::uint16_t>(d.nz));
        for (std::size_t y = 0; y < d.ny; ++y) {
            for (std::size_t x = 0; x < d.nx; ++x) {
                auto s = v.at(static_cast<std::int64_t>(x), static_cast<std::int64_t>(y), static_cast<std::int64_t>(z));
                if (bits == 8) line[x] = static_cast<unsigned char>(s);
                else std::memcpy(line.data() + 2*x, &s, 2);
            }
            if (TIFFWriteScanline(tif.get(), line.data(), static_cast<std::uint32_t>(y), 0) < 0) {
                throw io_error("cannot write TIFF " + path.string() + " (" + tiff_last_error + ")");
            }
        }
        if (!TIFFWriteDirectory(tif.get())) {
            throw io_error("cannot write TIFF directory to " + path.string());
        }
    }
}

namespace {

// round(num/den) half away from zero, den > 0.
std::int64_t div_round(std::int64_t num, std::int64_t den) noexcept {
    const std::int64_t mag = (2*(num < 0? -num: num) + den)/(2*den);
    return num < 0? -mag: mag;
}

template <typename Fn>
void walk_segment(int3 a, int3 b, Fn&& visit) {
    if (std::tie(b.x, b.y, b.z) < std::tie(a.x, a.y, a.z)) std::swap(a, b);
    const int3 d = b - a;
    const std::int64_t n = std::max({std::abs(d.x), std::abs(d.y), std::abs(d.z)});
    if (n == 0) {
        visit(a);
        return;
    }
    for (std::int64_t k = 0; k <= n; ++k) {
        visit(int3{a.x + div_round(d.x*k, n), a.y + div_round(d.y*k, n), a.z + div_round(d.z*k, n)});
    }
}

} // anonymous namespace

raster_result rasterize(const neuron_reconstruction& r, const dims3& dims, const int3& origin) {
    raster_result out{binary_map(dims, origin)};
    auto mark = [&](const int3& v) {
        if (dims.contains(v)) out.map.set(v);
    };
    for (const auto& p: r.points()) {
        const auto v = voxel_of(p.pos, origin);
        if (!dims.contains(v)) ++out.points_out_of_bounds;
        mark(v);
        if (p.parent) walk_segment(v, voxel_of(r.at(*p.parent).pos, origin), mark);
    }
    return out;
}

} // namespace neuroqc
