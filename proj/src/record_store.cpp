#include "changeblind/record_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "changeblind/error.hpp"

namespace changeblind::data {

namespace {

class LockedFile {
 public:
  LockedFile(const std::filesystem::path& path, int flags) {
    fd_ = ::open(path.c_str(), flags | O_CLOEXEC, 0644);
    if (fd_ < 0) fail("open", path);
    if (::flock(fd_, LOCK_EX) != 0) fail("lock", path);
  }
  ~LockedFile() {
    if (fd_ >= 0) ::close(fd_);  // releases the lock
  }
  LockedFile(const LockedFile&) = delete;
  LockedFile& operator=(const LockedFile&) = delete;

  int fd() const { return fd_; }

  std::size_t size() const {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) throw IoError(std::string("fstat: ") + std::strerror(errno));
    return static_cast<std::size_t>(st.st_size);
  }

  std::string read_from(std::size_t offset, std::size_t end) const {
    std::string buf(end - offset, '\0');
    std::size_t done = 0;
    while (done < buf.size()) {
      const ssize_t n = ::pread(fd_, buf.data() + done, buf.size() - done,
                                static_cast<off_t>(offset + done));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("read: ") + std::strerror(errno));
      }
      if (n == 0) break;
      done += static_cast<std::size_t>(n);
    }
    buf.resize(done);
    return buf;
  }

 private:
  [[noreturn]] static void fail(const char* what, const std::filesystem::path& path) {
    throw IoError(std::string(what) + " " + path.string() + ": " + std::strerror(errno));
  }
  int fd_ = -1;
};

}  // namespace

RecordStore::RecordStore(std::filesystem::path path, Options options)
    : path_(std::move(path)), options_(std::move(options)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  LockedFile f(path_, O_RDWR | O_CREAT);
  const std::size_t size = f.size();
  std::string text = f.read_from(0, size);
  const std::size_t last_newline = text.rfind('\n');
  const std::size_t keep = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (keep < text.size()) {
    if (::ftruncate(f.fd(), static_cast<off_t>(keep)) != 0 || ::fdatasync(f.fd()) != 0) {
      throw IoError("cannot repair " + path_.string() + ": " + std::strerror(errno));
    }
    repaired_bytes_ = text.size() - keep;
    text.resize(keep);
  }
  ingest(text);
  offset_ = keep;
}

void RecordStore::ingest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const stats::DetectionRecord r = stats::record_from_json_line(line);
    keys_.emplace(r.observer_id, r.pair_id);
  }
}

void RecordStore::append(const stats::DetectionRecord& record, std::optional<std::size_t> width,
                         std::optional<std::size_t> height) {
  stats::validate_record(record, width, height);
  if (options_.known_pairs && !options_.known_pairs->contains(record.pair_id)) {
    throw ValidationError("unknown pair id " + record.pair_id);
  }
  if (options_.known_observers && !options_.known_observers->contains(record.observer_id)) {
    throw ValidationError("unknown observer id " + record.observer_id);
  }
  const std::string line = stats::record_to_json_line(record) + "\n";

  std::lock_guard lock(mutex_);
  LockedFile f(path_, O_RDWR | O_APPEND | O_CREAT);
  const std::size_t size = f.size();
  if (size > offset_) {
    const std::string fresh = f.read_from(offset_, size);
    const std::size_t complete = fresh.rfind('\n');
    if (complete != std::string::npos) {
      ingest(fresh.substr(0, complete + 1));
      offset_ += complete + 1;
    }
  }
  if (keys_.contains({record.observer_id, record.pair_id})) {
    throw ConflictError("observer " + record.observer_id + " already has a record for pair " +
                        record.pair_id);
  }
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t n = ::write(f.fd(), line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("append to " + path_.string() + ": " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fdatasync(f.fd()) != 0) {
    throw IoError("sync " + path_.string() + ": " + std::strerror(errno));
  }
  keys_.emplace(record.observer_id, record.pair_id);
  offset_ = f.size();
}

bool RecordStore::contains(const std::string& observer_id, const std::string& pair_id) const {
  std::lock_guard lock(mutex_);
  return keys_.contains({observer_id, pair_id});
}

std::size_t RecordStore::size() const {
  std::lock_guard lock(mutex_);
  return keys_.size();
}

std::vector<stats::DetectionRecord> RecordStore::read_all() const {
  std::ifstream in(path_);
  if (!in) throw IoError("cannot open " + path_.string());
  std::vector<stats::DetectionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // no trailing newline: a write in progress
    if (!line.empty()) out.push_back(stats::record_from_json_line(line));
  }
  return out;
}

}  // namespace changeblind::data
