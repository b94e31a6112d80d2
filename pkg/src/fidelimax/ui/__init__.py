"""
UI - rich による端末表示
"""
