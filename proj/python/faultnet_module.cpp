#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ftn/coverage.hpp"
#include "ftn/fault_program.hpp"
#include "ftn/fault_stream.hpp"
#include "ftn/fuzzer.hpp"
#include "ftn/mutation.hpp"
#include "ftn/stats.hpp"
#include "ftn/testbed/digest.hpp"
#include "ftn/testbed/net.hpp"
#include "ftn/testbed/wire.hpp"

namespace py = pybind11;
using namespace ftn;

namespace {

Bytes to_bytes(const py::bytes& b) {
    std::string s = b;
    return Bytes(s.begin(), s.end());
}

py::bytes from_bytes(const Bytes& b) {
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

} // namespace

PYBIND11_MODULE(faultnet, m) {
    m.doc() = "Core operations of the faultnet fault-injection fuzzer";

    py::class_<fault::FaultStream>(m, "FaultStream")
        .def(py::init([](const py::bytes& b) { return fault::FaultStream(to_bytes(b)); }))
        .def("consume", &fault::FaultStream::consume, py::arg("n_bits"),
             "Next n_bits (little-endian within each byte); 0 once exhausted.")
        .def_property_readonly("exhausted", &fault::FaultStream::exhausted)
        .def_property_readonly("cursor_bits", &fault::FaultStream::cursor_bits)
        .def("reset", &fault::FaultStream::reset);

    m.def("apply_value_fault", [](uint64_t original, uint64_t word, unsigned width_bits) {
        uint64_t mask = width_bits >= 64 ? ~0ULL : ((1ULL << width_bits) - 1);
        return (original ^ word) & mask;
    }, py::arg("original"), py::arg("stream_word"), py::arg("width_bits"));

    m.def("apply_branch_fault",
          [](bool condition, uint64_t bit) { return static_cast<bool>(condition ^ (bit & 1)); },
          py::arg("condition"), py::arg("stream_bit"));

    m.def("apply_switch_fault", [](uint32_t original_index, uint64_t b, uint32_t case_count) {
        if (b == 0 || case_count == 0) return original_index;
        return static_cast<uint32_t>((original_index + b) % case_count);
    }, py::arg("original_index"), py::arg("stream_byte"), py::arg("case_count"));

    m.def("apply_call_fault", [](uint64_t b, uint32_t table_len) -> py::object {
        if (b == 0 || table_len == 0) return py::make_tuple("call", 0);
        uint32_t r = static_cast<uint32_t>(b % (table_len + 1));
        if (r == table_len) return py::make_tuple("skip", py::none());
        return py::make_tuple("call", r);
    }, py::arg("stream_byte"), py::arg("table_len"),
       "('call', index) or ('skip', None); byte 0 is the identity fault.");

    m.def("bucketize", [](int count) { return cov::bucketize(static_cast<uint8_t>(count)); },
          py::arg("count"), "AFL count class of a coverage cell value.");

    py::class_<cov::NoveltyIndex>(m, "NoveltyIndex")
        .def(py::init<size_t>(), py::arg("cells") = cov::kMapSize)
        .def("observe", [](cov::NoveltyIndex& idx, const py::bytes& map) {
            Bytes b = to_bytes(map);
            auto obs = idx.observe(b);
            return py::make_tuple(obs.is_novel, obs.novel_cells);
        }, py::arg("coverage_map"), "(is_novel, novel_cells)")
        .def_property_readonly("cells_seen", &cov::NoveltyIndex::cells_seen);

    m.def("dedup_key", [](const std::vector<std::string>& frames) {
        auto key = fuzz::dedup_key(frames);
        return std::vector<std::string>(key.begin(), key.end());
    }, py::arg("frames"), "First five frames, sentinel-padded.");

    m.def("crc32", [](const py::bytes& b) { return testbed::crc32(to_bytes(b)); }, py::arg("data"));

    m.def("sha256", [](const py::bytes& b) {
        auto h = testbed::sha256(to_bytes(b));
        return py::bytes(reinterpret_cast<const char*>(h.data()), h.size());
    }, py::arg("data"));

    m.def("hmac_sha256", [](const py::bytes& key, const py::bytes& msg) {
        auto h = testbed::hmac_sha256(to_bytes(key), to_bytes(msg));
        return py::bytes(reinterpret_cast<const char*>(h.data()), h.size());
    }, py::arg("key"), py::arg("msg"));

    m.def("encode_frame", [](int type, const py::bytes& payload) {
        testbed::Frame f;
        f.type = static_cast<uint8_t>(type);
        f.payload = to_bytes(payload);
        return from_bytes(f.encode());
    }, py::arg("frame_type"), py::arg("payload"), "TinyChat wire frame with its CRC.");

    py::class_<fault::ProgramFile>(m, "FaultProgram")
        .def(py::init<>())
        .def_static("parse", [](const py::bytes& b) { return fault::ProgramFile::parse(to_bytes(b)); })
        .def_static("load", &fault::ProgramFile::load, py::arg("path"))
        .def("save", &fault::ProgramFile::save, py::arg("path"))
        .def("serialize", [](const fault::ProgramFile& p) { return from_bytes(p.serialize()); })
        .def("add_entry", [](fault::ProgramFile& p, uint32_t site_id, const py::bytes& stream) {
            p.entries.push_back({site_id, to_bytes(stream)});
        }, py::arg("site_id"), py::arg("stream"))
        .def_property_readonly("entries", [](const fault::ProgramFile& p) {
            std::vector<std::pair<uint32_t, py::bytes>> out;
            for (const auto& e : p.entries) out.emplace_back(e.site_id, from_bytes(e.stream));
            return out;
        });

    m.def("havoc", [](const py::bytes& data, uint64_t seed, int ops) {
        Bytes b = to_bytes(data);
        Rng rng(seed);
        for (int i = 0; i < ops; ++i) mut::apply(b, rng);
        return from_bytes(b);
    }, py::arg("data"), py::arg("seed"), py::arg("ops") = 1,
       "Apply the campaign havoc operators deterministically.");

    m.def("percentile", [](std::vector<double> values, double p) { return stats::percentile(std::move(values), p); },
          py::arg("values"), py::arg("p"));
}
