#include "radarseg4d/fov.hpp"

#include <stdexcept>

namespace radarseg4d {

std::string_view axis_name(Axis axis) {
    switch (axis) {
        case Axis::Elevation: return "elevation";
        case Axis::Azimuth: return "azimuth";
        case Axis::Range: return "range";
        case Axis::Doppler: return "doppler";
    }
    return "?";
}

std::string_view view_name(ViewId view) {
    switch (view) {
        case ViewId::EA: return "ea";
        case ViewId::ER: return "er";
        case ViewId::ED: return "ed";
        case ViewId::RA: return "ra";
        case ViewId::DA: return "da";
    }
    return "?";
}

std::optional<ViewId> parse_view(std::string_view name) {
    for (ViewId v : kAllViews) {
        if (view_name(v) == name) return v;
    }
    return std::nullopt;
}

const Interval& FieldOfView::interval(Axis axis) const {
    switch (axis) {
        case Axis::Elevation: return elevation;
        case Axis::Azimuth: return azimuth;
        case Axis::Range: return range;
        case Axis::Doppler: return doppler;
    }
    return elevation;
}

Interval& FieldOfView::interval(Axis axis) {
    return const_cast<Interval&>(static_cast<const FieldOfView&>(*this).interval(axis));
}

void FieldOfView::validate() const {
    for (Axis a : kAllAxes) {
        const Interval& i = interval(a);
        if (!(i.lo < i.hi)) {
            throw std::invalid_argument("field of view: " + std::string(axis_name(a)) +
                                        " interval must satisfy lo < hi");
        }
    }
}

std::size_t BinConfig::coarse(Axis axis) const {
    switch (axis) {
        case Axis::Elevation: return elevation_coarse;
        case Axis::Azimuth: return azimuth_coarse;
        case Axis::Range: return range;
        case Axis::Doppler: return doppler;
    }
    return 0;
}

std::size_t BinConfig::final_bins(Axis axis) const {
    switch (axis) {
        case Axis::Elevation: return elevation;
        case Axis::Azimuth: return azimuth;
        case Axis::Range: return range;
        case Axis::Doppler: return doppler;
    }
    return 0;
}

void BinConfig::validate() const {
    for (Axis a : kAllAxes) {
        if (coarse(a) == 0 || final_bins(a) == 0) {
            throw std::invalid_argument("bin counts must be positive (" + std::string(axis_name(a)) + ")");
        }
        if (coarse(a) == 1 && final_bins(a) != 1) {
            throw std::invalid_argument("coarse " + std::string(axis_name(a)) +
                                        " axis needs at least 2 bins to be resized");
        }
    }
}

}  // namespace radarseg4d
