#pragma once

#include "vlc/batch.hpp"
#include "vlc/checkpoint.hpp"
#include "vlc/config.hpp"
#include "vlc/data/dataset.hpp"
#include "vlc/data/image.hpp"
#include "vlc/data/synthetic.hpp"
#include "vlc/data/vocab.hpp"
#include "vlc/embedding.hpp"
#include "vlc/encoder.hpp"
#include "vlc/eval.hpp"
#include "vlc/finetune.hpp"
#include "vlc/model.hpp"
#include "vlc/nn.hpp"
#include "vlc/objectives.hpp"
#include "vlc/ops.hpp"
#include "vlc/optim.hpp"
#include "vlc/pipeline.hpp"
#include "vlc/pretrain.hpp"
#include "vlc/probe.hpp"
#include "vlc/runtime.hpp"
#include "vlc/tensor.hpp"
#include "vlc/trainer.hpp"
