import sys

from src.facedetail.cli import main

if __name__ == "__main__":
    sys.exit(main())
