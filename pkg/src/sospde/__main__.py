"""
支持 python -m sospde 方式启动
"""
import sys

from sospde.cli import main

if __name__ == "__main__":
    sys.exit(main())
