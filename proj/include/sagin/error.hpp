#pragma once

#include <stdexcept>
#include <string>

namespace sagin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented invariant (bad config value, malformed file, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A link with zero Shannon rate cannot carry any payload.
class ZeroRate : public Error {
public:
    ZeroRate() : Error("channel rate is zero; link is unusable") {}
};

class DimensionError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class DimensionMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class MissingEntry : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class ZeroVector : public Error {
public:
    using Error::Error;
};

class UnknownLocation : public Error {
public:
    using Error::Error;
};

class MissingTruth : public Error {
public:
    using Error::Error;
};

class WindowTooLarge : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class NotNormalized : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class EmptyCut : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class NonFinite : public Error {
public:
    using Error::Error;
};

} // namespace sagin
