#pragma once

#include "smpcnn/bilinear.hpp"
#include "smpcnn/comparison.hpp"
#include "smpcnn/correlated.hpp"
#include "smpcnn/deploy.hpp"
#include "smpcnn/errors.hpp"
#include "smpcnn/helper.hpp"
#include "smpcnn/metrics.hpp"
#include "smpcnn/model.hpp"
#include "smpcnn/net.hpp"
#include "smpcnn/oracle.hpp"
#include "smpcnn/party.hpp"
#include "smpcnn/pipeline.hpp"
#include "smpcnn/prg.hpp"
#include "smpcnn/proto_tensor.hpp"
#include "smpcnn/ring.hpp"
#include "smpcnn/session.hpp"
#include "smpcnn/share_io.hpp"
#include "smpcnn/sharing.hpp"
#include "smpcnn/splitter.hpp"
#include "smpcnn/tcp.hpp"
#include "smpcnn/tensor.hpp"
#include "smpcnn/tensor_io.hpp"
