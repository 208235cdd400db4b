#include "ftn/coverage_runtime.hpp"

#include <cstdlib>
#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

namespace ftn::cov {

namespace {
uint8_t* g_cells = nullptr;
EdgeRecorder g_recorder;
} // namespace

bool attach_file(const char* path) {
    int fd = ::open(path, O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) return false;
    if (::ftruncate(fd, static_cast<off_t>(kMapSize)) != 0) {
        ::close(fd);
        return false;
    }
    void* mem = ::mmap(nullptr, kMapSize, PROT_READ | PROT_WRITE, MAP_SHARED, fd, 0);
    ::close(fd);
    if (mem == MAP_FAILED) return false;
    g_cells = static_cast<uint8_t*>(mem);
    g_recorder = EdgeRecorder(g_cells, kMapSize);
    return true;
}

bool attach_from_env() {
    const char* path = std::getenv(kEnvMapPath);
    if (!path || !*path) return false;
    return attach_file(path);
}

void detach() {
    if (g_cells) {
        ::munmap(g_cells, kMapSize);
        g_cells = nullptr;
        g_recorder = EdgeRecorder{};
    }
}

EdgeRecorder& recorder() { return g_recorder; }

} // namespace ftn::cov
