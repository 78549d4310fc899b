#ifndef SECRELAY_SECRELAY_HPP
#define SECRELAY_SECRELAY_HPP

#include "secrelay/channel.hpp"
#include "secrelay/common.hpp"
#include "secrelay/fading.hpp"
#include "secrelay/json_io.hpp"
#include "secrelay/optim.hpp"
#include "secrelay/rates.hpp"

#endif
