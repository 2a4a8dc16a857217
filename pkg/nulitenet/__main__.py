# -*- coding: utf-8 -*-

import sys

from nulitenet.cli import main

sys.exit(main())
