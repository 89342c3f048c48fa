import sys

from harness.app import GroupSlabApp

if __name__ == "__main__":
    sys.exit(GroupSlabApp().run())
