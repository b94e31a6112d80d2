"""
コアモジュール - 量子状態・POVM・パウリ演算、エラー、設定、入出力
"""
