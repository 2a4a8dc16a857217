# -*- coding: utf-8 -*-

from nulitenet.arch.builders import (ARCHITECTURES, NuLiteBlockSpec, build_architecture,
                                     build_fire_module, build_nu_lite_block, build_nu_litenet,
                                     build_squeezenet)
from nulitenet.arch.cost import CostReport, count_macs, count_params
from nulitenet.arch.graph import LayerSpec, NetGraph, propagate_shapes
from nulitenet.arch.network import Network
