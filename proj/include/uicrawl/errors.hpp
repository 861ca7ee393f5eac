#pragma once

#include <stdexcept>
#include <string>

namespace uicrawl {

// Base for all domain errors. Subclasses are declared next to the module
// whose contract they belong to.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define UICRAWL_DEFINE_ERROR(Name)                                            \
    class Name : public ::uicrawl::Error {                                    \
    public:                                                                   \
        using ::uicrawl::Error::Error;                                        \
    }

} // namespace uicrawl
