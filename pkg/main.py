#!/usr/bin/env python3
"""
Точка входа командной строки news-metapath
"""

import sys

from src.news_metapath.core.app import run

if __name__ == "__main__":
    try:
        sys.exit(run(sys.argv[1:]))
    except KeyboardInterrupt:
        print("\nЗапуск прерван пользователем")
        sys.exit(130)
