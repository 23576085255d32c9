#pragma once

#include <stdexcept>
#include <string>

namespace hyb {

// Error
//
// Root of every error the runtime reports. Each failure mode named by the
// public contracts has its own type so callers can react selectively.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A fixed-capacity writer was asked to hold more bytes than it has room for.
class CapacityExceeded : public Error {
  public:
    using Error::Error;
};

// A reader ran off the end of its region before a value was complete.
class TruncatedInput : public Error {
  public:
    using Error::Error;
};

class PeerClosed : public Error {
  public:
    PeerClosed() : Error("peer closed the link") {}
    using Error::Error;
};

class SpawnFailure : public Error {
  public:
    using Error::Error;
};

class HandshakeTimeout : public Error {
  public:
    using Error::Error;
};

class VersionMismatch : public Error {
  public:
    using Error::Error;
};

// A single item does not fit into an empty transfer buffer.
class ItemTooLarge : public Error {
  public:
    using Error::Error;
};

class MalformedBlock : public Error {
  public:
    using Error::Error;
};

class UnknownKernel : public Error {
  public:
    using Error::Error;
};

}  // end of namespace hyb ----------------------------------------------------
